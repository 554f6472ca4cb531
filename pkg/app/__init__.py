"""droopsim - DC microgrid adaptive droop control simulator"""
__version__ = "1.0.0"

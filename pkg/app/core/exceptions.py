"""
Exception Hierarchy
Every failure the simulator reports deliberately derives from DroopSimError
"""

from typing import Optional


class DroopSimError(Exception):
    """Base class for simulator errors"""


class ConfigError(DroopSimError):
    """Invalid scenario or configuration"""

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        text = f"{message} (at {location})" if location else message
        super().__init__(text)


class SimulationFault(DroopSimError):
    """The plant left the finite domain or has no operating point"""

    def __init__(self, message: str, t: Optional[float] = None):
        self.t = t
        text = f"{message} at t={t:.6f}s" if t is not None else message
        super().__init__(text)


class ControllerFault(DroopSimError):
    """An adaptive update produced a non-finite value"""

    def __init__(self, message: str, loop: str = ""):
        self.loop = loop
        super().__init__(f"[{loop}] {message}" if loop else message)


class ModelInvalidError(DroopSimError, ValueError):
    """A model precondition does not hold"""


class SettleError(DroopSimError):
    """A validation run did not reach steady state"""


class TraceError(DroopSimError):
    """A trace file or evaluation window cannot be used"""

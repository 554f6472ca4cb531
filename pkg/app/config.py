"""
Configuration Management
Simulator-wide defaults, overridable from the environment or a .env file
"""

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Simulator settings from environment variables"""

    # Environment
    ENVIRONMENT: str = "development"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "text"  # "json" or "text"

    # Time steps (seconds)
    PLANT_DT: float = 1e-4
    PLANT_DT_MAX: float = 1e-3
    CONTROL_DT: float = 1e-2
    RECORD_DT: float = 1e-3

    # Electrical bases
    V_BASE: float = 400.0

    # Load realisation
    CPL_CURRENT_FLOOR: float = 0.05  # amps
    CC_STIFFNESS: float = 1e3  # 1/s, constant-current tracking rate
    CPL_TIME_CONSTANT: float = 0.02  # s, constant-power conductance regulation

    # Integrator
    RK4_STABILITY_SPAN: float = 2.5  # max |h * lambda| per sub-step

    # Adaptive control
    PROJECTION_TOL: float = 1e-9
    SIGN_HYSTERESIS: float = 0.05  # amps

    # Communication
    COMM_DELAY: float = 1e-2

    # Steady-state detection and metrics
    SETTLE_WINDOW: float = 0.1
    SETTLE_TOL: float = 1e-4
    SETTLING_BAND: float = 0.02
    ISE_WINDOW: float = 4.0

    # Output
    OUTPUT_DIR: str = "out"

    class Config:
        env_file = ".env"
        case_sensitive = True


# Create settings instance
settings = Settings()

"""
Exception Handlers
Centralized error handling for the command line
"""

import functools
from typing import Callable

from app.core.exceptions import ConfigError, ControllerFault, SimulationFault, TraceError
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_FAULT = 3
EXIT_TRACE = 4


def handle_errors(command: Callable[..., int]) -> Callable[..., int]:
    """
    Convert exceptions raised by a CLI command into log lines and exit codes

    Args:
        command: Command function returning an exit code

    Returns:
        Wrapped command that never raises
    """

    @functools.wraps(command)
    def wrapper(*args, **kwargs) -> int:
        try:
            return command(*args, **kwargs)
        except ConfigError as exc:
            logger.warning(f"⚠️  Invalid scenario: {exc}")
            return EXIT_CONFIG
        except SimulationFault as exc:
            logger.error(f"❌ Simulation fault: {exc}", extra={"sim_time": exc.t})
            return EXIT_FAULT
        except ControllerFault as exc:
            logger.error(f"❌ Controller fault: {exc}")
            return EXIT_FAULT
        except TraceError as exc:
            logger.error(f"❌ Trace error: {exc}")
            return EXIT_TRACE
        except Exception as exc:
            logger.error(f"❌ Unhandled exception: {exc}", exc_info=True)
            return EXIT_UNEXPECTED

    return wrapper

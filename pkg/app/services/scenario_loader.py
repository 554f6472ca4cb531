"""
Scenario Loader
TOML scenario files to validated Scenario models
"""

from pathlib import Path
from typing import Any, Dict, Optional, Union

import toml
from pydantic import ValidationError

from app.core.exceptions import ConfigError
from app.models.schemas import ControllerKind, Scenario
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


def scenario_from_dict(data: Dict[str, Any], source: str = "<scenario>") -> Scenario:
    """
    Validate a parsed scenario tree

    Raises:
        ConfigError: With the dotted path of the first invalid field
    """
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "<root>"
        more = f" (+{e.error_count() - 1} more)" if e.error_count() > 1 else ""
        raise ConfigError(f"{first['msg']}{more}", f"{source}: {location}")


def load_scenario(
        path: Union[str, Path],
        controller: Optional[ControllerKind] = None,
) -> Scenario:
    """
    Read and validate a scenario file

    Args:
        path: TOML file
        controller: Overrides the file's controller choice

    Raises:
        ConfigError: Missing file, TOML syntax error (with line and column) or
            invalid content
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("scenario file not found", str(path))

    try:
        data = toml.load(path)
    except toml.TomlDecodeError as e:
        raise ConfigError(f"TOML syntax error: {e.msg}", f"{path}:{e.lineno}:{e.colno}")

    scenario = scenario_from_dict(data, source=str(path))
    if controller is not None:
        scenario = scenario.model_copy(update={"controller": ControllerKind(controller)})

    logger.debug(f"📄 Loaded scenario '{scenario.name}' from {path}")
    return scenario


def describe(scenario: Scenario) -> str:
    """One-line description for `validate`"""
    load = scenario.plant.load
    return (
        f"{scenario.name}: {scenario.plant.n} converters, {load.kind} load, "
        f"{scenario.duration:g} s, {len(scenario.events)} events, "
        f"controller={scenario.controller.value}, "
        f"{len(scenario.metrics.all_windows())} ISE windows"
    )

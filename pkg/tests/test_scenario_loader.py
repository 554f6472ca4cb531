"""
Scenario files: bundled cases, TOML and validation errors, shorthand fields.
"""

import re

import pytest

from app.core.exceptions import ConfigError
from app.models.schemas import ControllerKind, EventKind, ResistiveLoad
from app.services.scenario_loader import describe, load_scenario, scenario_from_dict


@pytest.mark.parametrize("name", ["activation", "loadstep", "cyclic"])
def test_bundled_scenarios_load(scenario_dir, name):
    scenario = load_scenario(scenario_dir / f"{name}.toml")
    assert scenario.name == name
    assert scenario.plant.n == 2
    assert name in describe(scenario)


def test_activation_scenario_contents(scenario_dir):
    scenario = load_scenario(scenario_dir / "activation.toml")
    assert [(ev.t, ev.kind) for ev in scenario.events] == [
        (2.0, EventKind.ENABLE_CURRENT_LOOP.value),
        (8.0, EventKind.ENABLE_VOLTAGE_LOOP.value),
    ]
    assert scenario.timing.control_every == 100
    assert scenario.timing.record_every == 10


def test_cyclic_scenario_has_ten_windows(scenario_dir):
    scenario = load_scenario(scenario_dir / "cyclic.toml")
    windows = scenario.metrics.all_windows()
    assert len(windows) == 10
    assert windows[-1].t_end == pytest.approx(40.0)


def test_cyclic_windows_hold_identical_load_steps(scenario_dir):
    scenario = load_scenario(scenario_dir / "cyclic.toml")
    loads = {ev.t: ev.load.z for ev in scenario.events if ev.kind == EventKind.SET_LOAD.value}
    heavy, light = 400.0 ** 2 / 6000.0, 400.0 ** 2 / 3000.0
    assert scenario.plant.load.z == pytest.approx(light)
    for window in scenario.metrics.all_windows():
        assert loads[window.t_start] == pytest.approx(heavy)
        assert loads[window.t_start + 2.0] == pytest.approx(light)


def test_rated_power_and_load_power_shorthand(short_scenario):
    scenario = scenario_from_dict(short_scenario)
    assert [c.i_rated for c in scenario.plant.converters] == [10.0, 5.0]
    assert scenario.plant.load == ResistiveLoad(z=400.0 ** 2 / 3000.0)


def test_controller_override(scenario_dir):
    scenario = load_scenario(scenario_dir / "activation.toml", controller=ControllerKind.PI)
    assert scenario.controller == ControllerKind.PI


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "nope.toml")


def test_syntax_error_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('name = "bad"\nthis is not toml\n')
    with pytest.raises(ConfigError) as info:
        load_scenario(path)
    assert re.search(r"bad\.toml:\d+:\d+$", info.value.location)


def test_validation_error_reports_field_path(short_scenario):
    short_scenario["plant"]["converters"][0]["tau_v"] = -1.0
    with pytest.raises(ConfigError) as info:
        scenario_from_dict(short_scenario)
    assert info.value.location.endswith("plant.converters.0.tau_v")


def test_unsorted_events_are_rejected(short_scenario):
    short_scenario["events"] = [
        {"t": 0.3, "kind": "enable_voltage_loop"},
        {"t": 0.1, "kind": "enable_current_loop"},
    ]
    with pytest.raises(ConfigError):
        scenario_from_dict(short_scenario)


@pytest.mark.parametrize(
    "patch",
    [
        {"events": [{"t": 0.1, "kind": "enable_current_loop", "node": 3}]},
        {"events": [{"t": 0.9, "kind": "enable_current_loop"}]},
        {"graph": {"edges": [[1, 3]]}},
        {"adaptive": {"nodes": {"5": {"current_theta": [0.0, 0.0]}}}},
        {"metrics": {"windows": [{"t_start": 0.0, "t_end": 2.0}]}},
        {"timing": {"plant_dt": 1e-4, "control_dt": 1.5e-4}},
        {"duration": 0.0},
    ],
)
def test_inconsistent_scenarios_are_rejected(short_scenario, patch):
    short_scenario.update(patch)
    with pytest.raises(ConfigError):
        scenario_from_dict(short_scenario)


def test_converter_line_count_mismatch(short_scenario):
    short_scenario["plant"]["lines"].pop()
    with pytest.raises(ConfigError):
        scenario_from_dict(short_scenario)

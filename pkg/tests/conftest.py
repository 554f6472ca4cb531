"""
Shared fixtures: the two-converter reference microgrid and small scenario trees
"""

import copy
import sys
from pathlib import Path

import pytest

_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(_ROOT))

from app.models.schemas import (  # noqa: E402
    ConstantCurrentLoad,
    ConstantPowerLoad,
    ConverterParams,
    LineParams,
    PlantParams,
    ResistiveLoad,
)
from app.services.plant import ElectricalNetwork  # noqa: E402

SCENARIO_DIR = _ROOT / "scenarios"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: closed-loop scenario runs taking tens of seconds")


def reference_plant(load=None, droops=(1.0, 2.0)) -> PlantParams:
    """400 V bus, 4 kW and 2 kW converters, 0.5 ohm / 3 mH lines"""
    return PlantParams(
        v_base=400.0,
        converters=[
            ConverterParams(v_ref=400.0, tau_v=0.005, i_rated=10.0, r_d0=droops[0]),
            ConverterParams(v_ref=400.0, tau_v=0.005, i_rated=5.0, r_d0=droops[1]),
        ],
        lines=[LineParams(r=0.5, l=0.003), LineParams(r=0.5, l=0.003)],
        load=load if load is not None else ResistiveLoad(power=3000.0),
    )


@pytest.fixture
def plant_params() -> PlantParams:
    return reference_plant()


@pytest.fixture
def network(plant_params) -> ElectricalNetwork:
    return ElectricalNetwork.from_params(plant_params)


@pytest.fixture
def cpl_network() -> ElectricalNetwork:
    return ElectricalNetwork.from_params(reference_plant(ConstantPowerLoad(p=3000.0)))


@pytest.fixture
def cc_network() -> ElectricalNetwork:
    return ElectricalNetwork.from_params(reference_plant(ConstantCurrentLoad(i=7.5)))


_SHORT_SCENARIO = {
    "name": "short",
    "duration": 0.5,
    "plant": {
        "converters": [
            {"v_ref": 400.0, "tau_v": 0.005, "rated_power": 4000.0, "r_d0": 1.0},
            {"v_ref": 400.0, "tau_v": 0.005, "rated_power": 2000.0, "r_d0": 2.0},
        ],
        "lines": [{"r": 0.5, "l": 0.003}, {"r": 0.5, "l": 0.003}],
        "load": {"kind": "resistive", "power": 3000.0},
    },
}


@pytest.fixture
def short_scenario() -> dict:
    """Half-second scenario tree without events"""
    return copy.deepcopy(_SHORT_SCENARIO)


@pytest.fixture
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture(autouse=True)
def _quiet_cwd(tmp_path, monkeypatch):
    # keep default output directories out of the repository
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def make_plant():
    return reference_plant

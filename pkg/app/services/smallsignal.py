"""
Small-Signal Models
Reduced first-order sensitivities of bus voltage and line current to droop changes
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.config import settings
from app.core.exceptions import ModelInvalidError, SettleError
from app.models.schemas import (
    ConstantCurrentLoad,
    ConverterParams,
    LineParams,
    PlantParams,
    ResistiveLoad,
)
from app.services.plant import ElectricalNetwork, equilibrium, step
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

# Stiff companion source used to hold the bus in the current rig
COMPANION_R = 1e-3
COMPANION_MARGIN = 10.0  # amps drawn beyond the converter under test
RIG_DURATION = 0.5


@dataclass(frozen=True)
class FirstOrderTf:
    """b / (s - a)"""
    gain_b: float
    pole_a: float

    def __post_init__(self):
        if not self.pole_a < 0:
            raise ModelInvalidError(f"pole {self.pole_a} is not stable")

    @property
    def dc_gain(self) -> float:
        return -self.gain_b / self.pole_a

    @property
    def time_constant(self) -> float:
        return -1.0 / self.pole_a

    def response(self, s: complex) -> complex:
        return self.gain_b / (s - self.pole_a)


class OperatingPoint(BaseModel):
    """Quiescent point of one converter and its feeder"""
    i_op: float = Field(..., description="Quiescent line current (A)")
    r_d: float = Field(..., description="Droop resistance (ohm)")
    line: LineParams = Field(default_factory=LineParams)
    tau_v: float = Field(0.005, gt=0)

    @model_validator(mode="after")
    def _finite(self) -> "OperatingPoint":
        if not (math.isfinite(self.i_op) and math.isfinite(self.r_d)):
            raise ValueError("operating point must be finite")
        if self.r_d + self.line.r == 0:
            raise ValueError("r_d + line.r must be non-zero")
        return self

    @property
    def r_total(self) -> float:
        return self.r_d + self.line.r


def voltage_sensitivity(op: OperatingPoint) -> FirstOrderTf:
    """Bus voltage response to a droop change with the current held: -i/(1 + tau*s)"""
    return FirstOrderTf(gain_b=-op.i_op / op.tau_v, pole_a=-1.0 / op.tau_v)


def current_sensitivity(op: OperatingPoint) -> FirstOrderTf:
    """
    Line current response to a droop change with the bus held

    -(i/R) / (1 + (l/R + tau)*s) with R = r_d + r

    Raises:
        ModelInvalidError: r_d + r <= 0
    """
    r_total = op.r_total
    if r_total <= 0:
        raise ModelInvalidError(f"r_d + r = {r_total} must be positive")
    t_eq = op.line.l / r_total + op.tau_v
    return FirstOrderTf(gain_b=-(op.i_op / r_total) / t_eq, pole_a=-1.0 / t_eq)


# ============================================================================
# FINITE-DIFFERENCE CHECK
# ============================================================================

@dataclass(frozen=True)
class SensitivityCheck:
    voltage_error: float
    current_error: float
    fd_voltage_gain: float
    fd_current_gain: float
    voltage_gain: float
    current_gain: float


def _voltage_rig(op: OperatingPoint) -> ElectricalNetwork:
    v_base = settings.V_BASE
    params = PlantParams(
        v_base=v_base,
        converters=[ConverterParams(
            v_ref=v_base + op.r_total * op.i_op,
            tau_v=op.tau_v,
            i_rated=max(op.i_op, 1.0),
            r_d0=op.r_d,
        )],
        lines=[op.line],
        load=ConstantCurrentLoad(i=op.i_op),
    )
    return ElectricalNetwork.from_params(params)


def _current_rig(op: OperatingPoint) -> ElectricalNetwork:
    v_base = settings.V_BASE
    params = PlantParams(
        v_base=v_base,
        converters=[
            ConverterParams(
                v_ref=v_base + op.r_total * op.i_op,
                tau_v=op.tau_v,
                i_rated=max(op.i_op, 1.0),
                r_d0=op.r_d,
            ),
            ConverterParams(v_ref=v_base, tau_v=op.tau_v, i_rated=COMPANION_MARGIN, r_d0=0.0),
        ],
        lines=[op.line, LineParams(r=COMPANION_R, l=op.line.l)],
        load=ResistiveLoad(z=v_base / (abs(op.i_op) + COMPANION_MARGIN)),
    )
    return ElectricalNetwork.from_params(params)


def _settled(values: np.ndarray, what: str) -> float:
    final = float(values[-1])
    deviation = float(np.max(np.abs(values - final)))
    if deviation > settings.SETTLE_TOL * max(abs(final), 1.0):
        raise SettleError(f"{what} did not settle (deviation {deviation:.3e})")
    return final


def _steady_response(network: ElectricalNetwork, droops: np.ndarray, start) -> Tuple[float, float]:
    """Run from `start` with fixed droops, return settled (v_bus, i_1)"""
    dt = settings.PLANT_DT
    n_steps = int(round(RIG_DURATION / dt))
    n_window = int(round(settings.SETTLE_WINDOW / dt))
    v_bus = np.empty(n_window)
    i_1 = np.empty(n_window)

    state = start
    for k in range(n_steps):
        state = step(state, droops, network, dt)
        j = k - (n_steps - n_window)
        if j >= 0:
            v_bus[j] = state.v_bus
            i_1[j] = state.i_line[0]
    return _settled(v_bus, "bus voltage"), _settled(i_1, "line current")


def _relative_error(measured: float, analytic: float) -> float:
    # absolute error when the analytic gain is zero
    if analytic == 0:
        return abs(measured)
    return abs(measured - analytic) / abs(analytic)


def validate_against_plant(op: OperatingPoint, perturbation: float) -> SensitivityCheck:
    """
    Compare central-difference plant sensitivities with the analytic DC gains

    Args:
        op: Operating point to check
        perturbation: Droop perturbation (ohm), at most 1% of r_d + r

    Returns:
        SensitivityCheck with relative errors of both gains

    Raises:
        ModelInvalidError: Invalid perturbation or operating point
        SettleError: A rig did not reach steady state
    """
    g_v = voltage_sensitivity(op)
    g_i = current_sensitivity(op)
    if perturbation <= 0:
        raise ModelInvalidError("perturbation must be positive")
    if perturbation > 0.01 * op.r_total:
        raise ModelInvalidError("perturbation exceeds 1% of r_d + r")
    if op.i_op < 0:
        raise ModelInvalidError("the sink rig cannot realise a negative operating current")

    logger.info(f"🔬 Finite-difference check at i={op.i_op} A, r_d={op.r_d} ohm")

    v_net = _voltage_rig(op)
    v_droops = np.array([op.r_d])
    v_start = equilibrium(v_net, v_droops)
    v_hi, _ = _steady_response(v_net, v_droops + perturbation, v_start)
    v_lo, _ = _steady_response(v_net, v_droops - perturbation, v_start)
    fd_v = (v_hi - v_lo) / (2.0 * perturbation)

    i_net = _current_rig(op)
    i_droops = np.array([op.r_d, 0.0])
    delta = np.array([perturbation, 0.0])
    i_start = equilibrium(i_net, i_droops)
    _, i_hi = _steady_response(i_net, i_droops + delta, i_start)
    _, i_lo = _steady_response(i_net, i_droops - delta, i_start)
    fd_i = (i_hi - i_lo) / (2.0 * perturbation)

    check = SensitivityCheck(
        voltage_error=_relative_error(fd_v, g_v.dc_gain),
        current_error=_relative_error(fd_i, g_i.dc_gain),
        fd_voltage_gain=fd_v,
        fd_current_gain=fd_i,
        voltage_gain=g_v.dc_gain,
        current_gain=g_i.dc_gain,
    )
    logger.info(
        f"✅ Sensitivity errors: voltage {check.voltage_error:.2%}, "
        f"current {check.current_error:.2%}"
    )
    return check

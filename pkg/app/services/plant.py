"""
Electrical Plant
N droop-controlled converters feeding one bus through RL lines, plus one load
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from app.config import settings
from app.core.exceptions import ModelInvalidError, SimulationFault
from app.models.schemas import (
    ConstantCurrentLoad,
    ConstantPowerLoad,
    PlantParams,
    ResistiveLoad,
)

LoadModel = ResistiveLoad | ConstantPowerLoad | ConstantCurrentLoad


# ============================================================================
# STATE AND NETWORK
# ============================================================================

@dataclass(frozen=True)
class PlantState:
    """Plant state; v_bus and i_load are algebraic and always consistent with i_line"""
    t: float
    v_conv: np.ndarray
    i_line: np.ndarray
    v_bus: float
    i_load: float
    g_load: float = 0.0
    cpl_floored: bool = False


@dataclass(frozen=True)
class ElectricalNetwork:
    """PlantParams compiled into arrays"""
    v_ref: np.ndarray
    tau_v: np.ndarray
    r_line: np.ndarray
    l_line: np.ndarray
    i_rated: np.ndarray
    r_d0: np.ndarray
    load: LoadModel
    v_base: float

    @classmethod
    def from_params(cls, params: PlantParams) -> "ElectricalNetwork":
        conv = params.converters
        return cls(
            v_ref=np.array([c.v_ref for c in conv], dtype=float),
            tau_v=np.array([c.tau_v for c in conv], dtype=float),
            r_line=np.array([ln.r for ln in params.lines], dtype=float),
            l_line=np.array([ln.l for ln in params.lines], dtype=float),
            i_rated=np.array([c.i_rated for c in conv], dtype=float),
            r_d0=np.array([c.r_d0 for c in conv], dtype=float),
            load=params.load,
            v_base=params.v_base,
        )

    @property
    def n(self) -> int:
        return int(self.v_ref.size)

    def with_load(self, load: LoadModel) -> "ElectricalNetwork":
        return replace(self, load=load)


def _is_zero_power(load: LoadModel) -> bool:
    return isinstance(load, ConstantPowerLoad) and load.p == 0.0


def _demanded_current(load: LoadModel) -> float:
    # zero-power CPL degenerates to a zero-current sink
    return 0.0 if _is_zero_power(load) else load.i


# ============================================================================
# ALGEBRAIC BUS
# ============================================================================

def bus_voltage(
        i_total: float,
        load: LoadModel,
        line_drive: Optional[Tuple[float, float]] = None,
        i_floor: float = settings.CPL_CURRENT_FLOOR,
) -> float:
    """
    Quasi-static bus voltage for a total feeder current

    Args:
        i_total: Sum of the line currents (A)
        load: Load model
        line_drive: (sum((V_i - r_i*i_i)/l_i), sum(1/l_i)), required by the
            constant-current load, whose bus voltage depends on the line states
        i_floor: Current below which a constant-power load is clamped

    Returns:
        Bus voltage (V)

    Raises:
        SimulationFault: Non-finite input
        ModelInvalidError: Constant-current load without line_drive
    """
    if not math.isfinite(i_total):
        raise SimulationFault(f"non-finite load current {i_total}")

    if isinstance(load, ResistiveLoad):
        return load.z * i_total
    if isinstance(load, ConstantPowerLoad) and load.p > 0:
        return load.p / max(i_total, i_floor)

    if line_drive is None:
        raise ModelInvalidError("constant-current bus voltage needs the line drive terms")
    drive, inv_l = line_drive
    kappa = settings.CC_STIFFNESS
    return (drive + kappa * (i_total - _demanded_current(load))) / inv_l


def _simulated_bus(
        network: ElectricalNetwork,
        v_conv: np.ndarray,
        i_line: np.ndarray,
        g_load: float,
) -> float:
    load = network.load
    i_total = float(i_line.sum())
    if isinstance(load, ConstantPowerLoad) and load.p > 0:
        return i_total / g_load
    if isinstance(load, ResistiveLoad):
        return bus_voltage(i_total, load)
    drive = float(np.sum((v_conv - network.r_line * i_line) / network.l_line))
    inv_l = float(np.sum(1.0 / network.l_line))
    return bus_voltage(i_total, load, line_drive=(drive, inv_l))


def make_state(
        network: ElectricalNetwork,
        v_conv: np.ndarray,
        i_line: np.ndarray,
        t: float = 0.0,
        g_load: Optional[float] = None,
        cpl_floored: bool = False,
) -> PlantState:
    """Build a state with the algebraic quantities filled in"""
    v_conv = np.asarray(v_conv, dtype=float)
    i_line = np.asarray(i_line, dtype=float)
    load = network.load
    if g_load is None:
        g_load = 0.0
        if isinstance(load, ConstantPowerLoad) and load.p > 0:
            i_total = float(i_line.sum())
            g_load = max(i_total, settings.CPL_CURRENT_FLOOR) ** 2 / load.p
    v_bus = _simulated_bus(network, v_conv, i_line, g_load)
    return PlantState(
        t=t,
        v_conv=v_conv,
        i_line=i_line,
        v_bus=v_bus,
        i_load=float(i_line.sum()),
        g_load=g_load,
        cpl_floored=cpl_floored,
    )


# ============================================================================
# DYNAMICS
# ============================================================================

def _rhs(
        network: ElectricalNetwork,
        droops: np.ndarray,
        v_conv: np.ndarray,
        i_line: np.ndarray,
        g_load: float,
) -> Tuple[np.ndarray, np.ndarray]:
    v_bus = _simulated_bus(network, v_conv, i_line, g_load)
    dv = ((network.v_ref - droops * i_line) - v_conv) / network.tau_v
    di = (v_conv - v_bus - network.r_line * i_line) / network.l_line
    return dv, di


def derivatives(
        state: PlantState,
        droops: np.ndarray,
        network: ElectricalNetwork,
) -> Tuple[np.ndarray, np.ndarray]:
    """Time derivatives of (v_conv, i_line); droops may be negative"""
    return _rhs(network, np.asarray(droops, dtype=float), state.v_conv, state.i_line, state.g_load)


def _stiffness(network: ElectricalNetwork, g_load: float) -> float:
    load = network.load
    line_rate = float(np.max(network.r_line / network.l_line))
    inv_l = float(np.sum(1.0 / network.l_line))
    if isinstance(load, ResistiveLoad):
        rate = line_rate + load.z * inv_l
    elif isinstance(load, ConstantPowerLoad) and load.p > 0:
        rate = line_rate + inv_l / g_load
    else:
        rate = max(line_rate, settings.CC_STIFFNESS)
    return max(rate, float(np.max(1.0 / network.tau_v)))


def _relax_conductance(
        network: ElectricalNetwork,
        i_line: np.ndarray,
        g_load: float,
        dt: float,
) -> Tuple[float, bool]:
    load = network.load
    if not isinstance(load, ConstantPowerLoad) or load.p == 0:
        return g_load, False

    i_total = float(i_line.sum())
    i_floor = settings.CPL_CURRENT_FLOOR
    if i_total < i_floor:
        return i_floor ** 2 / load.p, True

    v_bus = i_total / g_load
    target = load.p / v_bus ** 2
    alpha = -math.expm1(-dt / settings.CPL_TIME_CONSTANT)
    return g_load + alpha * (target - g_load), False


def step(
        state: PlantState,
        droops: np.ndarray,
        network: ElectricalNetwork,
        dt: float,
) -> PlantState:
    """
    Advance the plant by dt with classical RK4

    dt is split into equal sub-steps so every sub-step stays inside the RK4
    stability interval of the fastest line mode. Droops are held over dt.

    Raises:
        ModelInvalidError: dt outside (0, PLANT_DT_MAX]
        SimulationFault: Non-finite state after the step
    """
    if not 0.0 < dt <= settings.PLANT_DT_MAX:
        raise ModelInvalidError(f"plant step {dt} outside (0, {settings.PLANT_DT_MAX}]")

    droops = np.asarray(droops, dtype=float)
    g = state.g_load
    n_sub = max(1, math.ceil(_stiffness(network, g) * dt / settings.RK4_STABILITY_SPAN))
    h = dt / n_sub

    t = state.t + dt
    v, i = state.v_conv, state.i_line
    try:
        for _ in range(n_sub):
            k1v, k1i = _rhs(network, droops, v, i, g)
            k2v, k2i = _rhs(network, droops, v + 0.5 * h * k1v, i + 0.5 * h * k1i, g)
            k3v, k3i = _rhs(network, droops, v + 0.5 * h * k2v, i + 0.5 * h * k2i, g)
            k4v, k4i = _rhs(network, droops, v + h * k3v, i + h * k3i, g)
            v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            i = i + (h / 6.0) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
    except SimulationFault as e:
        if e.t is not None:
            raise
        # stage faults carry no time of their own
        raise SimulationFault(str(e), t) from e

    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(i))):
        raise SimulationFault("non-finite plant state", t)

    g, floored = _relax_conductance(network, i, g, dt)
    new_state = make_state(network, v, i, t=t, g_load=g, cpl_floored=floored)
    if not math.isfinite(new_state.v_bus):
        raise SimulationFault("non-finite bus voltage", t)
    return new_state


# ============================================================================
# STEADY STATE
# ============================================================================

def _source_terms(network: ElectricalNetwork, droops: np.ndarray) -> Tuple[np.ndarray, float, float]:
    r_total = droops + network.r_line
    if np.any(r_total == 0):
        raise SimulationFault("zero output resistance, no operating point")
    cond = 1.0 / r_total
    return cond, float(np.sum(network.v_ref * cond)), float(np.sum(cond))


def equilibrium(network: ElectricalNetwork, droops: np.ndarray, t: float = 0.0) -> PlantState:
    """
    Closed-form steady state for fixed droops

    Raises:
        SimulationFault: The load admits no operating point
    """
    droops = np.asarray(droops, dtype=float)
    load = network.load

    if isinstance(load, ResistiveLoad):
        system = np.diag(droops + network.r_line) + load.z * np.ones((network.n, network.n))
        try:
            i_line = np.linalg.solve(system, network.v_ref)
        except np.linalg.LinAlgError as e:
            raise SimulationFault(f"singular steady-state system: {e}", t)
        v_bus = load.z * float(i_line.sum())
    else:
        cond, s, g = _source_terms(network, droops)
        if g == 0:
            raise SimulationFault("output conductances cancel, no operating point", t)
        if isinstance(load, ConstantPowerLoad) and load.p > 0:
            disc = s * s - 4.0 * g * load.p
            if disc < 0:
                raise SimulationFault(
                    f"constant-power load of {load.p:.0f} W exceeds the deliverable power", t
                )
            v_bus = (s + math.sqrt(disc)) / (2.0 * g)
        else:
            v_bus = (s - _demanded_current(load)) / g
        i_line = (network.v_ref - v_bus) * cond

    v_conv = v_bus + network.r_line * i_line
    g_load = 0.0
    if isinstance(load, ConstantPowerLoad) and load.p > 0:
        g_load = load.p / v_bus ** 2
    return make_state(network, v_conv, i_line, t=t, g_load=g_load)


def restored_droops(network: ElectricalNetwork, v_target: Optional[float] = None) -> np.ndarray:
    """
    Droops giving equal per-unit currents and a mean converter voltage of v_target

    Raises:
        ModelInvalidError: The load draws no current, so the droops are undetermined
    """
    v_target = network.v_base if v_target is None else v_target
    load = network.load
    i_r = network.i_rated
    sum_r = float(i_r.sum())
    mean_drop = float(np.mean(network.r_line * i_r))

    if isinstance(load, ResistiveLoad):
        scale = v_target / (load.z * sum_r + mean_drop)
    elif isinstance(load, ConstantPowerLoad) and load.p > 0:
        disc = (v_target * sum_r) ** 2 - 4.0 * mean_drop * sum_r * load.p
        if disc < 0:
            raise ModelInvalidError("constant-power load cannot be served at the target voltage")
        scale = 2.0 * load.p / (v_target * sum_r + math.sqrt(disc))
    else:
        scale = _demanded_current(load) / sum_r

    if scale <= 0:
        raise ModelInvalidError("load draws no current, droops are undetermined")

    i_line = scale * i_r
    v_bus = v_target - scale * mean_drop
    return (network.v_ref - v_bus) / i_line - network.r_line


def steady_state_ratio(r_d1: float, r_d2: float, r_1: float, r_2: float) -> float:
    """Steady-state current ratio i_1/i_2 of two converters on a common bus"""
    num, den = r_d2 + r_2, r_d1 + r_1
    if den <= 0 or num <= 0:
        raise ModelInvalidError("droop plus line resistance must be positive")
    return num / den

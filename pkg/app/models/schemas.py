import math
from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import settings


# ============================================================================
# ENUMS
# ============================================================================

class ControllerKind(str, Enum):
    ADAPTIVE = "adaptive"
    PI = "pi"


class LoopKind(str, Enum):
    VOLTAGE = "voltage"
    CURRENT = "current"


class EventKind(str, Enum):
    ENABLE_CURRENT_LOOP = "enable_current_loop"
    ENABLE_VOLTAGE_LOOP = "enable_voltage_loop"
    SET_LOAD = "set_load"


# ============================================================================
# PLANT
# ============================================================================

class ConverterParams(BaseModel):
    """One droop-controlled converter with a first-order voltage loop"""
    v_ref: float = Field(400.0, gt=0, description="Initial reference voltage (V)")
    tau_v: float = Field(0.005, gt=0, description="Voltage-loop time constant (s)")
    i_rated: float = Field(..., gt=0, description="Per-unit current base (A)")
    r_d0: float = Field(1.0, description="Initial droop resistance (ohm)")

    class Config:
        frozen = True


class LineParams(BaseModel):
    """Series RL feeder between a converter and the bus"""
    r: float = Field(0.5, gt=0, description="Cable resistance (ohm)")
    l: float = Field(0.003, gt=0, description="Cable inductance (H)")

    class Config:
        frozen = True


class ResistiveLoad(BaseModel):
    kind: Literal["resistive"] = "resistive"
    z: float = Field(..., gt=0, description="Load resistance (ohm)")

    @model_validator(mode="before")
    @classmethod
    def _from_power(cls, data: Any) -> Any:
        # "power = 3000" is shorthand for the resistance drawing 3 kW at V_BASE
        if isinstance(data, dict) and "z" not in data and "power" in data:
            data = dict(data)
            power = float(data.pop("power"))
            if power <= 0:
                raise ValueError("resistive load power must be positive")
            data["z"] = settings.V_BASE ** 2 / power
        return data

    class Config:
        frozen = True


class ConstantPowerLoad(BaseModel):
    kind: Literal["constant_power"] = "constant_power"
    p: float = Field(..., ge=0, description="Demanded power (W)")

    class Config:
        frozen = True


class ConstantCurrentLoad(BaseModel):
    kind: Literal["constant_current"] = "constant_current"
    i: float = Field(..., ge=0, description="Demanded current (A)")

    class Config:
        frozen = True


LoadModel = Annotated[
    Union[ResistiveLoad, ConstantPowerLoad, ConstantCurrentLoad],
    Field(discriminator="kind"),
]


class PlantParams(BaseModel):
    """N converters on one bus, each through its own feeder, plus one load"""
    v_base: float = Field(default_factory=lambda: settings.V_BASE, gt=0)
    converters: List[ConverterParams]
    lines: List[LineParams]
    load: LoadModel

    @model_validator(mode="before")
    @classmethod
    def _rated_power(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        v_base = float(data.get("v_base", settings.V_BASE))
        converters = []
        for conv in data.get("converters", []):
            if isinstance(conv, dict) and "i_rated" not in conv and "rated_power" in conv:
                conv = dict(conv)
                conv["i_rated"] = float(conv.pop("rated_power")) / v_base
            converters.append(conv)
        return {**data, "converters": converters}

    @model_validator(mode="after")
    def _shapes(self) -> "PlantParams":
        if not self.converters:
            raise ValueError("at least one converter is required")
        if len(self.converters) != len(self.lines):
            raise ValueError(
                f"{len(self.converters)} converters but {len(self.lines)} lines"
            )
        return self

    @property
    def n(self) -> int:
        return len(self.converters)

    class Config:
        frozen = True


# ============================================================================
# CONTROLLERS
# ============================================================================

class CrmConfig(BaseModel):
    """Closed-loop reference model adaptive controller constants"""
    a_m: float = Field(-10.0, lt=0, description="Reference model pole (1/s)")
    b_m: float = Field(10.0, description="Reference model gain")
    l: float = Field(-10.0, lt=0, description="Error feedback gain")
    gamma_0: float = Field(1000.0, gt=0, description="Initial adaptation gain")
    m_theta: float = Field(50.0, gt=0, description="Projection radius for theta")
    m_b: float = Field(50.0, gt=0, description="Projection radius for b")
    sign_b: Literal[-1, 1] = 1
    r_0: float = Field(1.0, gt=0, description="Nominal reference")
    alpha_min: float = Field(0.1, gt=0, description="Gain-schedule clamp")
    b_init: float = Field(0.1, gt=0)
    theta_init: Tuple[float, float] = (0.0, 0.0)
    gain_scheduling: bool = True
    legacy_unnormalized: bool = False
    projection_tol: float = Field(default_factory=lambda: settings.PROJECTION_TOL, gt=0)

    @model_validator(mode="after")
    def _consistency(self) -> "CrmConfig":
        if self.a_m + self.l >= 0:
            raise ValueError("a_m + l must be negative for stable filters")
        if math.hypot(*self.theta_init) > self.m_theta:
            raise ValueError("theta_init lies outside the projection ball")
        if self.b_init > self.m_b:
            raise ValueError("b_init exceeds the projection radius m_b")
        return self

    class Config:
        frozen = True


class NodeOverride(BaseModel):
    """Per-node initial parameters, used for detuned starts"""
    voltage_theta: Optional[Tuple[float, float]] = None
    current_theta: Optional[Tuple[float, float]] = None


def _voltage_loop() -> CrmConfig:
    return CrmConfig(gamma_0=30000.0, m_theta=10.0, m_b=10.0)


def _current_loop() -> CrmConfig:
    # Over one control period the droop-to-current plant is close to static with
    # a gain of about -0.9 pu/ohm at full load, so |theta| must stay below 1.
    return CrmConfig(gamma_0=200.0, m_theta=0.8, m_b=5.0)


class AdaptiveConfig(BaseModel):
    voltage: CrmConfig = Field(default_factory=_voltage_loop)
    current: CrmConfig = Field(default_factory=_current_loop)
    nodes: Dict[int, NodeOverride] = Field(default_factory=dict)


class PiConfig(BaseModel):
    """PI secondary controller; outputs are -(kp*e + integ)"""
    kp_v: float = Field(2.0, ge=0)
    ki_v: float = Field(300.0, ge=0)
    kp_i: float = Field(0.1, ge=0)
    ki_i: float = Field(10.0, ge=0)
    clamp: float = Field(20.0, gt=0, description="Integrator limit (ohm)")
    warm_start: bool = False

    class Config:
        frozen = True


# ============================================================================
# SCENARIO
# ============================================================================

class TimingConfig(BaseModel):
    plant_dt: float = Field(default_factory=lambda: settings.PLANT_DT, gt=0)
    control_dt: float = Field(default_factory=lambda: settings.CONTROL_DT, gt=0)
    record_dt: float = Field(default_factory=lambda: settings.RECORD_DT, gt=0)

    @model_validator(mode="after")
    def _multiples(self) -> "TimingConfig":
        if self.plant_dt > settings.PLANT_DT_MAX:
            raise ValueError(f"plant_dt exceeds {settings.PLANT_DT_MAX} s")
        for name in ("control_dt", "record_dt"):
            ratio = getattr(self, name) / self.plant_dt
            if ratio < 1 or abs(ratio - round(ratio)) > 1e-6:
                raise ValueError(f"{name} must be an integer multiple of plant_dt")
        return self

    @property
    def control_every(self) -> int:
        return int(round(self.control_dt / self.plant_dt))

    @property
    def record_every(self) -> int:
        return int(round(self.record_dt / self.plant_dt))


class GraphConfig(BaseModel):
    """Directed communication graph; an edge [j, i] means node i hears node j"""
    edges: Optional[List[Tuple[int, int]]] = None
    delay: float = Field(default_factory=lambda: settings.COMM_DELAY, ge=0)


NodeSelector = Union[int, Literal["all"]]


class EnableCurrentLoop(BaseModel):
    t: float = Field(..., ge=0)
    kind: Literal["enable_current_loop"] = "enable_current_loop"
    node: NodeSelector = "all"


class EnableVoltageLoop(BaseModel):
    t: float = Field(..., ge=0)
    kind: Literal["enable_voltage_loop"] = "enable_voltage_loop"
    node: NodeSelector = "all"


class SetLoad(BaseModel):
    t: float = Field(..., ge=0)
    kind: Literal["set_load"] = "set_load"
    load: LoadModel


ScenarioEvent = Annotated[
    Union[EnableCurrentLoop, EnableVoltageLoop, SetLoad],
    Field(discriminator="kind"),
]


class IseWindow(BaseModel):
    """Evaluation window for the integral-squared-error indices"""
    t_start: float
    t_end: float
    v_ref: float = Field(default_factory=lambda: settings.V_BASE)
    i_refs: Optional[List[float]] = Field(
        None,
        description="Constant per-converter current references; default is the rating share of the load current"
    )

    @model_validator(mode="after")
    def _ordered(self) -> "IseWindow":
        if not self.t_end > self.t_start:
            raise ValueError("t_end must be greater than t_start")
        return self

    @property
    def tau(self) -> float:
        return self.t_end - self.t_start


def cycle_windows(t0: float, tau: float, count: int) -> List[IseWindow]:
    """count back-to-back windows of length tau from t0"""
    return [IseWindow(t_start=t0 + k * tau, t_end=t0 + (k + 1) * tau) for k in range(count)]


class CycleWindows(BaseModel):
    start: float = 0.0
    tau: float = Field(default_factory=lambda: settings.ISE_WINDOW, gt=0)
    count: int = Field(..., ge=1)

    def windows(self) -> List[IseWindow]:
        return cycle_windows(self.start, self.tau, self.count)


class MetricsConfig(BaseModel):
    windows: List[IseWindow] = Field(default_factory=list)
    cycles: Optional[CycleWindows] = None

    def all_windows(self) -> List[IseWindow]:
        windows = list(self.windows)
        if self.cycles is not None:
            windows += self.cycles.windows()
        return windows


class Scenario(BaseModel):
    """A complete simulation case: plant, controllers, events and metrics"""
    name: str = "scenario"
    duration: float = Field(..., gt=0)
    controller: ControllerKind = ControllerKind.ADAPTIVE
    seed: int = 0  # reserved; the simulation is noise-free
    timing: TimingConfig = Field(default_factory=TimingConfig)
    plant: PlantParams
    graph: GraphConfig = Field(default_factory=GraphConfig)
    adaptive: AdaptiveConfig = Field(default_factory=AdaptiveConfig)
    pi: PiConfig = Field(default_factory=PiConfig)
    events: List[ScenarioEvent] = Field(default_factory=list)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)

    @field_validator("events")
    @classmethod
    def _sorted(cls, events: List[Any]) -> List[Any]:
        times = [ev.t for ev in events]
        if times != sorted(times):
            raise ValueError("events must be sorted by time")
        return events

    @model_validator(mode="after")
    def _references(self) -> "Scenario":
        n = self.plant.n
        for ev in self.events:
            if ev.t > self.duration:
                raise ValueError(f"event at t={ev.t} is after the end of the run")
            node = getattr(ev, "node", "all")
            if node != "all" and not 1 <= node <= n:
                raise ValueError(f"event refers to node {node}, plant has {n}")
        for j, i in self.graph.edges or []:
            if not (1 <= j <= n and 1 <= i <= n):
                raise ValueError(f"edge [{j}, {i}] refers to a missing node")
        for node_id in self.adaptive.nodes:
            if not 1 <= node_id <= n:
                raise ValueError(f"adaptive override for missing node {node_id}")
        for window in self.metrics.all_windows():
            if window.t_start < 0 or window.t_end > self.duration + 1e-9:
                raise ValueError(
                    f"ISE window [{window.t_start}, {window.t_end}] is outside the run"
                )
            if window.i_refs is not None and len(window.i_refs) != n:
                raise ValueError(f"ISE window has {len(window.i_refs)} current references for {n} converters")
        return self

    class Config:
        json_schema_extra = {
            "example": {
                "name": "activation",
                "duration": 14.0,
                "plant": {
                    "converters": [
                        {"v_ref": 400, "tau_v": 0.005, "rated_power": 4000, "r_d0": 1.0},
                        {"v_ref": 400, "tau_v": 0.005, "rated_power": 2000, "r_d0": 2.0},
                    ],
                    "lines": [{"r": 0.5, "l": 0.003}, {"r": 0.5, "l": 0.003}],
                    "load": {"kind": "resistive", "power": 3000},
                },
                "events": [
                    {"t": 2.0, "kind": "enable_current_loop"},
                    {"t": 8.0, "kind": "enable_voltage_loop"},
                ],
            }
        }


# ============================================================================
# RUN SUMMARY
# ============================================================================

class SettlingReport(BaseModel):
    event: str
    t_event: float
    signal: str
    settling_time: Optional[float] = Field(
        None,
        description="Seconds after the event; null when the signal never settles"
    )


class WindowIse(BaseModel):
    t_start: float
    t_end: float
    ise_v: float
    ise_i: float


class LoggedEvent(BaseModel):
    t: float
    kind: str
    detail: str = ""


class RunSummary(BaseModel):
    """What `run` reports next to the trace"""
    scenario: str
    controller: ControllerKind
    duration: float
    wall_time: float
    steady_currents: List[float]
    steady_droops: List[float]
    v_bus: float
    v_mean: float
    settling: List[SettlingReport] = Field(default_factory=list)
    ise: List[WindowIse] = Field(default_factory=list)
    events: List[LoggedEvent] = Field(default_factory=list)
    fault: Optional[str] = None
    fault_time: Optional[float] = None

"""
Scenario Runner
Couples the plant, the communication layer and the secondary controllers on one clock
"""

import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from app.config import settings
from app.core.exceptions import ControllerFault, SimulationFault
from app.models.schemas import (
    ControllerKind,
    EnableCurrentLoop,
    LoggedEvent,
    LoopKind,
    RunSummary,
    Scenario,
    SetLoad,
    SettlingReport,
    WindowIse,
)
from app.services import metrics
from app.services.baseline import PiController
from app.services.plant import ElectricalNetwork, PlantState, equilibrium, make_state, restored_droops, step
from app.services.secondary import (
    AdaptiveDroop,
    CommGraph,
    DscNode,
    Network,
    PiDroop,
    consensus_references,
)
from app.services.trace import TraceRecorder
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

_TIME_EPS = 1e-9


def _describe_load(load) -> str:
    if load.kind == "resistive":
        return f"resistive {load.z:.3f} ohm"
    if load.kind == "constant_power":
        return f"constant power {load.p:g} W"
    return f"constant current {load.i:g} A"


@dataclass
class RunResult:
    trace: pd.DataFrame
    summary: RunSummary
    fault: Optional[SimulationFault] = None


class ScenarioRunner:
    """Runs one Scenario to completion or to the first simulation fault"""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.network = ElectricalNetwork.from_params(scenario.plant)
        self.graph = CommGraph.from_config(scenario.graph, self.network.n)
        self.comm = Network(self.graph, scenario.graph.delay)
        self.events: List[LoggedEvent] = []
        self.nodes, initial_droops = self._build_nodes()
        self.state: PlantState = equilibrium(self.network, initial_droops)

    def _build_nodes(self):
        sc = self.scenario
        net = self.network
        droops = net.r_d0.copy()
        warm = None
        if sc.controller == ControllerKind.PI and sc.pi.warm_start:
            droops = restored_droops(net)
            warm = PiController(sc.pi).warm_states(droops - net.r_d0)

        nodes = []
        for k in range(net.n):
            if sc.controller == ControllerKind.ADAPTIVE:
                adapter = AdaptiveDroop(sc.adaptive, k)
            else:
                adapter = PiDroop(sc.pi, state=warm[k] if warm else None)
            nodes.append(DscNode(k, net.i_rated[k], net.r_d0[k], adapter, v_base=net.v_base))
        return nodes, droops

    def _log_event(self, t: float, kind: str, detail: str) -> None:
        self.events.append(LoggedEvent(t=t, kind=kind, detail=detail))

    def _apply(self, event, t: float) -> None:
        if isinstance(event, SetLoad):
            self.network = self.network.with_load(event.load)
            self.state = make_state(self.network, self.state.v_conv, self.state.i_line, t=self.state.t)
            detail = _describe_load(event.load)
            logger.info(f"🔌 Load set to {detail}", extra={"sim_time": t, "event": "set_load"})
            self._log_event(t, "set_load", detail)
            return

        loop = LoopKind.CURRENT if isinstance(event, EnableCurrentLoop) else LoopKind.VOLTAGE
        targets = range(self.network.n) if event.node == "all" else [event.node - 1]
        for k in targets:
            self.nodes[k].enable(loop)
        who = "all nodes" if event.node == "all" else f"node {event.node}"
        logger.info(f"⚡ {loop.value.capitalize()} loop enabled on {who}", extra={"sim_time": t, "event": event.kind})
        self._log_event(t, event.kind, who)

    def _control_tick(self, t: float, dt: float) -> np.ndarray:
        state = self.state
        outgoing = []
        for k, node in enumerate(self.nodes):
            node.measure(state.i_line[k], state.v_conv[k])
            outgoing.append(node.message(t))
        delivered = self.comm.network_tick(outgoing, t)

        droops = np.empty(self.network.n)
        for k, node in enumerate(self.nodes):
            i_ref, v_bar = consensus_references(node, delivered[k], node.v_pu)
            droops[k], faults = node.dsc_step(state.i_line[k], i_ref, v_bar, dt)
            for fault in faults:
                self._log_event(t, "controller_fault", fault)
        return droops

    def run(self) -> RunResult:
        sc = self.scenario
        timing = sc.timing
        dt = timing.plant_dt
        n_steps = int(round(sc.duration / dt))
        recorder = TraceRecorder(self.network.n, n_steps // timing.record_every + 2)
        pending = list(sc.events)
        droops = np.array([node.droop for node in self.nodes])
        fault: Optional[SimulationFault] = None
        floored = False

        logger.info(
            f"🚀 Running '{sc.name}' ({sc.controller.value}) for {sc.duration:g} s in {settings.ENVIRONMENT}",
            extra={"event": "run_start"},
        )
        started = time.perf_counter()
        for k in range(n_steps + 1):
            t = k * dt
            if k % timing.control_every == 0 and k < n_steps:
                while pending and pending[0].t <= t + _TIME_EPS:
                    self._apply(pending.pop(0), t)
                try:
                    droops = self._control_tick(t, timing.control_dt)
                except ControllerFault as e:
                    fault = SimulationFault(str(e), t)
                    logger.error(f"❌ {fault}", extra={"sim_time": t, "event": "controller_fault"})
                    recorder.record(t, self.state, self.nodes, self.network.i_rated)
                    break
            if k % timing.record_every == 0:
                recorder.record(t, self.state, self.nodes, self.network.i_rated)
            if k == n_steps:
                break
            try:
                self.state = step(self.state, droops, self.network, dt)
            except SimulationFault as e:
                fault = e
                logger.error(f"❌ {e}", extra={"sim_time": e.t, "event": "simulation_fault"})
                break
            if self.state.cpl_floored != floored:
                floored = self.state.cpl_floored
                detail = "clamped at the current floor" if floored else "left the current floor"
                logger.warning(f"⚠️  Constant-power load {detail}", extra={"sim_time": self.state.t, "event": "cpl_floor"})
                self._log_event(self.state.t, "cpl_floor", detail)

        wall = time.perf_counter() - started
        trace = recorder.to_frame()
        summary = self._summarize(trace, wall, fault)
        logger.info(f"🏁 Finished '{sc.name}' in {wall:.1f} s wall time", extra={"event": "run_end"})
        return RunResult(trace=trace, summary=summary, fault=fault)

    # ========================================================================
    # SUMMARY
    # ========================================================================

    def _settling(self, trace: pd.DataFrame) -> List[SettlingReport]:
        t = trace["t"].to_numpy()
        t_last = float(t[-1])
        n = self.network.n
        signals = {f"i_line_{k}": trace[f"i_line_{k}"].to_numpy() for k in range(1, n + 1)}
        signals["v_mean"] = trace[[f"v_conv_{k}" for k in range(1, n + 1)]].to_numpy().mean(axis=1)

        times = sorted({ev.t for ev in self.scenario.events if ev.t < t_last})
        reports = []
        for idx, t_event in enumerate(times):
            t_end = times[idx + 1] if idx + 1 < len(times) else t_last
            if t_end - t_event <= settings.SETTLE_WINDOW:
                continue
            kinds = "+".join(ev.kind for ev in self.scenario.events if ev.t == t_event)
            for name, values in signals.items():
                reports.append(SettlingReport(
                    event=kinds,
                    t_event=t_event,
                    signal=name,
                    settling_time=metrics.settling_time(t, values, t_event, t_end),
                ))
        return reports

    def _summarize(self, trace: pd.DataFrame, wall: float, fault: Optional[SimulationFault]) -> RunSummary:
        sc = self.scenario
        n = self.network.n
        t = trace["t"].to_numpy()
        tail = trace[t >= t[-1] - settings.SETTLE_WINDOW]
        shares = self.network.i_rated / self.network.i_rated.sum()

        ise = []
        for window in sc.metrics.all_windows():
            if window.t_end > t[-1] + _TIME_EPS:
                continue
            ise.append(WindowIse(
                t_start=window.t_start,
                t_end=window.t_end,
                ise_v=metrics.ise_v(trace, window),
                ise_i=metrics.ise_i(trace, window, shares=shares),
            ))

        return RunSummary(
            scenario=sc.name,
            controller=sc.controller,
            duration=sc.duration,
            wall_time=wall,
            steady_currents=[float(tail[f"i_line_{k}"].mean()) for k in range(1, n + 1)],
            steady_droops=[float(tail[f"droop_{k}"].mean()) for k in range(1, n + 1)],
            v_bus=float(tail["v_bus"].mean()),
            v_mean=float(tail[[f"v_conv_{k}" for k in range(1, n + 1)]].to_numpy().mean()),
            settling=self._settling(trace) if len(trace) > 1 else [],
            ise=ise,
            events=self.events,
            fault=str(fault) if fault else None,
            fault_time=fault.t if fault else None,
        )


def run_scenario(scenario: Scenario) -> RunResult:
    return ScenarioRunner(scenario).run()

"""
Distributed Secondary Control
Per-node droop adaptation from consensus references exchanged over delayed links
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple, Union

import numpy as np

from app.config import settings
from app.core.exceptions import ConfigError, ControllerFault, ModelInvalidError
from app.models.schemas import AdaptiveConfig, GraphConfig, LoopKind, PiConfig
from app.services.baseline import PiController, PiState
from app.services.mrac import CrmController
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

V_PU_REF = 1.0


# ============================================================================
# COMMUNICATION
# ============================================================================

@dataclass(frozen=True)
class CommGraph:
    """adjacency[i, j] == 1 iff node i hears node j (0-based ids)"""
    adjacency: np.ndarray

    def __post_init__(self):
        if np.any(np.diag(self.adjacency) != 0):
            raise ConfigError("communication graph has a self-loop", "graph.edges")
        lonely = np.flatnonzero(self.adjacency.sum(axis=1) == 0)
        if lonely.size:
            ids = ", ".join(str(i + 1) for i in lonely)
            raise ConfigError(f"node(s) {ids} have no in-neighbour", "graph.edges")

    @property
    def n_nodes(self) -> int:
        return int(self.adjacency.shape[0])

    @classmethod
    def from_config(cls, graph: GraphConfig, n_nodes: int) -> "CommGraph":
        """Explicit 1-based [from, to] edges, or all-to-all when none are given"""
        if graph.edges is None:
            adjacency = np.ones((n_nodes, n_nodes), dtype=int) - np.eye(n_nodes, dtype=int)
        else:
            adjacency = np.zeros((n_nodes, n_nodes), dtype=int)
            for sender, receiver in graph.edges:
                adjacency[receiver - 1, sender - 1] = 1
        return cls(adjacency=adjacency)

    def in_neighbors(self, i: int) -> List[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    def edges(self) -> List[Tuple[int, int]]:
        """(sender, receiver) pairs in deterministic order"""
        return [(int(j), int(i)) for i, j in zip(*np.nonzero(self.adjacency))]


@dataclass(frozen=True)
class Message:
    sender: int
    v_pu: float
    i_pu: float
    sent_at: float


@dataclass
class DelayLine:
    """FIFO link with a fixed delivery delay"""
    delay: float
    queue: Deque[Tuple[float, Message]] = field(default_factory=deque)

    def push(self, message: Message) -> None:
        self.queue.append((message.sent_at + self.delay, message))

    def pop_ready(self, now: float) -> List[Tuple[float, Message]]:
        ready = []
        while self.queue and self.queue[0][0] <= now + 1e-9:
            ready.append(self.queue.popleft())
        return ready


def network_tick(
        graph: CommGraph,
        delay_lines: Dict[Tuple[int, int], DelayLine],
        outgoing: List[Message],
        now: float,
) -> Dict[int, List[Message]]:
    """
    Enqueue outgoing messages on every out-edge, then deliver what is due

    Returns:
        Delivered messages per receiving node, ordered by (deliver_at, sender)
    """
    for message in outgoing:
        for (sender, receiver), line in delay_lines.items():
            if sender == message.sender:
                line.push(message)

    delivered: Dict[int, List[Tuple[float, Message]]] = {i: [] for i in range(graph.n_nodes)}
    for (_, receiver), line in delay_lines.items():
        delivered[receiver].extend(line.pop_ready(now))
    return {
        i: [msg for _, msg in sorted(items, key=lambda item: (item[0], item[1].sender))]
        for i, items in delivered.items()
    }


class Network:
    """One DelayLine per edge of the graph"""

    def __init__(self, graph: CommGraph, delay: float = settings.COMM_DELAY):
        if delay < 0:
            raise ModelInvalidError("message delay must be non-negative")
        self.graph = graph
        self.lines = {edge: DelayLine(delay=delay) for edge in graph.edges()}
        self._last_now = float("-inf")

    def network_tick(self, outgoing: List[Message], now: float) -> Dict[int, List[Message]]:
        if now < self._last_now:
            raise ModelInvalidError("network time must be monotone")
        self._last_now = now
        return network_tick(self.graph, self.lines, outgoing, now)


# ============================================================================
# DROOP ADAPTERS
# ============================================================================

class AdaptiveDroop:
    """Voltage and current CRM loops; each contributes zero until enabled"""

    def __init__(
            self,
            config: AdaptiveConfig,
            node_id: int,
    ):
        override = config.nodes.get(node_id + 1)
        self.v_ctrl = CrmController(
            config.voltage,
            x0=V_PU_REF,
            theta_init=override.voltage_theta if override else None,
            name=f"node{node_id + 1}/voltage",
        )
        self.i_ctrl = CrmController(
            config.current,
            theta_init=override.current_theta if override else None,
            name=f"node{node_id + 1}/current",
        )
        self.enabled = {LoopKind.VOLTAGE: False, LoopKind.CURRENT: False}

    def enable(self, loop: LoopKind, x: float, r: float, sign_b: int) -> None:
        ctrl = self.v_ctrl if loop == LoopKind.VOLTAGE else self.i_ctrl
        ctrl.reset(x, sign_b=sign_b)
        self.enabled[loop] = True

    def _run(self, ctrl: CrmController, x: float, r: float, sign_b: int, dt: float) -> Tuple[float, Optional[str]]:
        ctrl.sign_b = sign_b
        try:
            return ctrl.update(x, r, dt), None
        except ControllerFault as e:
            ctrl.freeze()
            return ctrl.update(x, r, dt), str(e)

    def outputs(
            self,
            v_bar_pu: float,
            i_pu: float,
            i_ref_pu: float,
            sign_b: int,
            dt: float,
    ) -> Tuple[float, float, List[str]]:
        r_v = r_i = 0.0
        faults = []
        if self.enabled[LoopKind.VOLTAGE]:
            r_v, fault = self._run(self.v_ctrl, v_bar_pu, V_PU_REF, sign_b, dt)
            faults += [fault] if fault else []
        if self.enabled[LoopKind.CURRENT]:
            r_i, fault = self._run(self.i_ctrl, i_pu, i_ref_pu, sign_b, dt)
            faults += [fault] if fault else []
        return r_v, r_i, faults


class PiDroop:
    """PI loops with the same inputs and outputs as AdaptiveDroop"""

    def __init__(self, config: PiConfig, state: Optional[PiState] = None):
        self.controller = PiController(config)
        self.state = state or PiState()
        self.bumpless = state is None
        self.enabled = {LoopKind.VOLTAGE: False, LoopKind.CURRENT: False}

    def enable(self, loop: LoopKind, x: float, r: float, sign_b: int) -> None:
        cfg = self.controller.config
        if self.bumpless:
            if loop == LoopKind.VOLTAGE:
                self.state.integ_v = self.controller.bumpless_integrator(cfg.kp_v, r - x)
            else:
                self.state.integ_i = self.controller.bumpless_integrator(cfg.kp_i, r - x)
        self.enabled[loop] = True

    def outputs(
            self,
            v_bar_pu: float,
            i_pu: float,
            i_ref_pu: float,
            sign_b: int,
            dt: float,
    ) -> Tuple[float, float, List[str]]:
        e_v = V_PU_REF - v_bar_pu if self.enabled[LoopKind.VOLTAGE] else 0.0
        e_i = i_ref_pu - i_pu if self.enabled[LoopKind.CURRENT] else 0.0
        r_v, r_i = self.controller.pi_step(self.state, e_v, e_i, dt)
        return (
            r_v if self.enabled[LoopKind.VOLTAGE] else 0.0,
            r_i if self.enabled[LoopKind.CURRENT] else 0.0,
            [],
        )


DroopAdapter = Union[AdaptiveDroop, PiDroop]


# ============================================================================
# NODE
# ============================================================================

def per_unit(node: "DscNode", i: float, v: float) -> Tuple[float, float]:
    """(i_pu, v_pu) on the node's current base and the nominal voltage"""
    if node.i_rated <= 0 or node.v_base <= 0:
        raise ModelInvalidError("per-unit bases must be positive")
    return i / node.i_rated, v / node.v_base


def consensus_references(
        node: "DscNode",
        delivered: List[Message],
        own_v_pu: float,
) -> Tuple[float, float]:
    """
    Current reference and averaged voltage feedback from neighbour messages

    i_ref is the mean of the neighbours' per-unit currents; v_bar averages the
    node's own per-unit voltage with its neighbours'. The latest message per
    neighbour is kept; without any message the previous values are held.
    """
    for message in delivered:
        node.latest[message.sender] = message
    if not node.latest:
        return node.i_ref_pu, node.v_bar_pu

    heard = [node.latest[j] for j in sorted(node.latest)]
    i_ref = sum(m.i_pu for m in heard) / len(heard)
    v_bar = (own_v_pu + sum(m.v_pu for m in heard)) / (1 + len(heard))
    return i_ref, v_bar


class DscNode:
    """
    Secondary controller of one converter

    Reported droop is always r_d0 + r_v + r_i.
    """

    def __init__(
            self,
            node_id: int,
            i_rated: float,
            r_d0: float,
            adapter: DroopAdapter,
            v_base: float = settings.V_BASE,
    ):
        self.node_id = node_id
        self.i_rated = i_rated
        self.v_base = v_base
        self.r_d0 = r_d0
        self.adapter = adapter
        self.sign_b = -1
        self.latest: Dict[int, Message] = {}
        self.i_pu = 0.0
        self.v_pu = 1.0
        self.i_ref_pu = 0.0
        self.v_bar_pu = 1.0
        self.r_v = 0.0
        self.r_i = 0.0
        self._pending: List[LoopKind] = []
        self._seeded = False

    @property
    def droop(self) -> float:
        return self.r_d0 + self.r_v + self.r_i

    def enable(self, loop: LoopKind) -> None:
        """Activate a loop at the next dsc_step"""
        if not self.adapter.enabled[loop] and loop not in self._pending:
            self._pending.append(loop)

    def update_sign(self, i: float) -> int:
        """sign(b) = -sign(i) with a hysteresis band around zero"""
        band = settings.SIGN_HYSTERESIS
        if i > band:
            self.sign_b = -1
        elif i < -band:
            self.sign_b = 1
        return self.sign_b

    def measure(self, i: float, v: float) -> Tuple[float, float]:
        self.i_pu, self.v_pu = per_unit(self, i, v)
        if not self._seeded:
            # references start at the node's own values until a neighbour is heard
            self.i_ref_pu, self.v_bar_pu = self.i_pu, self.v_pu
            self._seeded = True
        return self.i_pu, self.v_pu

    def message(self, now: float) -> Message:
        return Message(sender=self.node_id, v_pu=self.v_pu, i_pu=self.i_pu, sent_at=now)

    def dsc_step(
            self,
            i: float,
            i_ref_pu: float,
            v_bar_pu: float,
            dt: float,
    ) -> Tuple[float, List[str]]:
        """
        One controller period

        Args:
            i: Line current (A), used for the sign rule
            i_ref_pu: Consensus current reference
            v_bar_pu: Consensus voltage feedback
            dt: Controller period

        Returns:
            (droop, fault messages raised by the loops this period)
        """
        self.i_ref_pu, self.v_bar_pu = i_ref_pu, v_bar_pu
        sign_b = self.update_sign(i)

        for loop in self._pending:
            x, r = (v_bar_pu, V_PU_REF) if loop == LoopKind.VOLTAGE else (self.i_pu, i_ref_pu)
            self.adapter.enable(loop, x, r, sign_b)
        self._pending = []

        self.r_v, self.r_i, faults = self.adapter.outputs(v_bar_pu, self.i_pu, i_ref_pu, sign_b, dt)
        for fault in faults:
            logger.warning(
                f"⚠️ Controller fault, loop frozen: {fault}",
                extra={"node": self.node_id + 1, "event": "controller_fault"},
            )
        droop = self.droop
        if not np.isfinite(droop):
            raise ControllerFault(f"non-finite droop {droop}", f"node{self.node_id + 1}")
        return droop, faults

    def loop_enabled(self, loop: LoopKind) -> bool:
        return self.adapter.enabled[loop]

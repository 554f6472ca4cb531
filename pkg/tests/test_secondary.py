"""
Secondary layer: per-unit bases, consensus references, delayed messaging and droop composition.
"""

import numpy as np
import pytest

from app.core.exceptions import ConfigError, ControllerFault, ModelInvalidError
from app.models.schemas import AdaptiveConfig, GraphConfig, LoopKind, PiConfig
from app.services.secondary import (
    AdaptiveDroop,
    CommGraph,
    DelayLine,
    DscNode,
    Message,
    Network,
    PiDroop,
    consensus_references,
    network_tick,
    per_unit,
)


def _adaptive_node(node_id=0, i_rated=10.0, r_d0=1.0):
    return DscNode(node_id, i_rated, r_d0, AdaptiveDroop(AdaptiveConfig(), node_id))


def _msg(sender, i_pu, v_pu=1.0, sent_at=0.0):
    return Message(sender=sender, v_pu=v_pu, i_pu=i_pu, sent_at=sent_at)


# ── per unit ─────────────────────────────────────────────────────────────────

def test_per_unit_bases():
    node = _adaptive_node(i_rated=10.0)
    assert per_unit(node, 5.0, 400.0) == (0.5, 1.0)
    assert per_unit(node, 0.0, 400.0)[0] == 0.0


# ── consensus ────────────────────────────────────────────────────────────────

def test_single_neighbour_reference():
    node = _adaptive_node()
    i_ref, _ = consensus_references(node, [_msg(1, 0.37)], 1.0)
    assert i_ref == pytest.approx(0.37)


def test_equal_voltages_average_to_themselves():
    node = _adaptive_node()
    _, v_bar = consensus_references(node, [_msg(1, 0.5, v_pu=0.95)], 0.95)
    assert v_bar == pytest.approx(0.95)


def test_three_node_average():
    node = _adaptive_node()
    i_ref, v_bar = consensus_references(node, [_msg(1, 0.4, 0.99), _msg(2, 0.6, 0.98)], 1.0)
    assert i_ref == pytest.approx(0.5)
    assert v_bar == pytest.approx((1.0 + 0.99 + 0.98) / 3.0)


def test_references_hold_without_messages():
    node = _adaptive_node()
    node.measure(4.0, 396.0)
    assert consensus_references(node, [], node.v_pu) == (pytest.approx(0.4), pytest.approx(0.99))
    consensus_references(node, [_msg(1, 0.7)], node.v_pu)
    i_ref, _ = consensus_references(node, [], node.v_pu)
    assert i_ref == pytest.approx(0.7)


def test_equal_currents_are_a_fixed_point():
    node = _adaptive_node()
    node.measure(5.0, 400.0)
    i_ref, v_bar = consensus_references(node, [_msg(1, 0.5)], node.v_pu)
    node.enable(LoopKind.CURRENT)
    node.dsc_step(5.0, i_ref, v_bar, 0.01)
    assert node.adapter.i_ctrl.last.e == 0.0


# ── graph and delay lines ────────────────────────────────────────────────────

def test_default_graph_is_all_to_all():
    graph = CommGraph.from_config(GraphConfig(), 3)
    assert graph.in_neighbors(0) == [1, 2]
    assert np.all(np.diag(graph.adjacency) == 0)


def test_explicit_edges_are_directed():
    graph = CommGraph.from_config(GraphConfig(edges=[(1, 2), (2, 1), (2, 3)]), 3)
    assert graph.in_neighbors(2) == [1]
    assert graph.in_neighbors(0) == [1]


def test_node_without_in_neighbour_is_rejected():
    with pytest.raises(ConfigError):
        CommGraph.from_config(GraphConfig(edges=[(1, 2)]), 2)


def test_self_loop_is_rejected():
    with pytest.raises(ConfigError):
        CommGraph.from_config(GraphConfig(edges=[(1, 1), (1, 2), (2, 1)]), 2)


def test_single_converter_has_no_neighbour():
    with pytest.raises(ConfigError):
        CommGraph.from_config(GraphConfig(), 1)


def test_message_arrives_after_delay():
    net = Network(CommGraph.from_config(GraphConfig(), 2), delay=0.01)
    assert net.network_tick([_msg(0, 0.5, sent_at=0.0)], 0.0)[1] == []
    delivered = net.network_tick([], 0.01)
    assert [m.i_pu for m in delivered[1]] == [0.5]


def test_zero_delay_delivers_same_tick():
    net = Network(CommGraph.from_config(GraphConfig(), 2), delay=0.0)
    delivered = net.network_tick([_msg(0, 0.5), _msg(1, 0.3)], 0.0)
    assert [m.sender for m in delivered[1]] == [0]
    assert [m.sender for m in delivered[0]] == [1]


def test_delay_line_is_fifo():
    line = DelayLine(delay=0.01)
    line.push(_msg(0, 0.1, sent_at=0.0))
    line.push(_msg(0, 0.2, sent_at=0.01))
    assert [m.i_pu for _, m in line.pop_ready(0.02)] == [0.1, 0.2]


def test_delivery_is_ordered_by_time_then_sender():
    graph = CommGraph(adjacency=np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]]))
    lines = {edge: DelayLine(delay=0.0) for edge in graph.edges()}
    delivered = network_tick(graph, lines, [_msg(2, 0.1), _msg(1, 0.2)], 0.0)
    assert [m.sender for m in delivered[0]] == [1, 2]


def test_network_time_must_be_monotone():
    net = Network(CommGraph.from_config(GraphConfig(), 2))
    net.network_tick([], 0.02)
    with pytest.raises(ModelInvalidError):
        net.network_tick([], 0.01)


# ── droop composition ────────────────────────────────────────────────────────

def test_disabled_loops_leave_initial_droop():
    node = _adaptive_node(r_d0=2.0)
    node.measure(2.5, 398.0)
    droop, _ = node.dsc_step(2.5, 0.5, 0.99, 0.01)
    assert droop == 2.0


def test_droop_is_sum_of_terms():
    node = _adaptive_node()
    node.measure(4.0, 398.0)
    node.enable(LoopKind.CURRENT)
    node.enable(LoopKind.VOLTAGE)
    for _ in range(20):
        droop, _ = node.dsc_step(4.0, 0.6, 0.995, 0.01)
        assert droop == node.r_d0 + node.r_v + node.r_i
    assert node.r_i != 0.0


def test_sign_follows_current_with_hysteresis():
    node = _adaptive_node()
    assert node.update_sign(1.0) == -1
    assert node.update_sign(-0.01) == -1
    assert node.update_sign(-0.2) == 1
    assert node.update_sign(0.04) == 1
    assert node.update_sign(0.06) == -1


def test_controller_fault_freezes_only_that_loop(monkeypatch):
    node = _adaptive_node()
    node.measure(4.0, 398.0)
    node.enable(LoopKind.CURRENT)
    node.enable(LoopKind.VOLTAGE)

    def broken(*args, **kwargs):
        raise ControllerFault("boom", "node1/current")

    monkeypatch.setattr(node.adapter.i_ctrl, "adapt_step", broken)
    droop, faults = node.dsc_step(4.0, 0.6, 0.995, 0.01)
    assert len(faults) == 1
    assert node.adapter.i_ctrl.frozen and not node.adapter.v_ctrl.frozen
    assert np.isfinite(droop)


def test_pi_activation_is_bumpless():
    node = DscNode(0, 10.0, 1.0, PiDroop(PiConfig()))
    node.measure(4.0, 398.0)
    node.enable(LoopKind.CURRENT)
    droop, _ = node.dsc_step(4.0, 0.6, 0.995, 0.01)
    # only the integrator increment of one period remains
    assert abs(droop - 1.0) <= PiConfig().ki_i * 0.2 * 0.01 + 1e-12


def test_activation_moves_gain_estimates_to_runtime_sign():
    node = _adaptive_node()
    node.measure(4.0, 398.0)
    node.enable(LoopKind.CURRENT)
    node.enable(LoopKind.VOLTAGE)
    node.dsc_step(4.0, 0.6, 0.995, 0.01)
    assert node.adapter.i_ctrl.sign_b == -1
    assert node.adapter.i_ctrl.state.b_hat < 0
    assert node.adapter.v_ctrl.state.b_hat < 0


def test_current_loop_stays_inside_its_radius():
    node = _adaptive_node()
    node.measure(4.0, 398.0)
    node.enable(LoopKind.CURRENT)
    radius = AdaptiveConfig().current.m_theta
    for k in range(500):
        # persistent sharing error the droop never corrects
        node.dsc_step(4.0, 0.2 if k % 100 < 50 else 0.8, 1.0, 0.01)
        assert np.linalg.norm(node.adapter.i_ctrl.state.theta) <= radius + 1e-6

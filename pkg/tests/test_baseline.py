"""
Fixed-gain PI droop corrections.
"""

import numpy as np
import pytest

from app.core.exceptions import ModelInvalidError
from app.models.schemas import PiConfig
from app.services.baseline import PiController, PiState


@pytest.fixture
def controller():
    return PiController(PiConfig())


def test_zero_error_outputs_negated_integrators(controller):
    state = PiState(integ_v=0.3, integ_i=-0.2)
    assert controller.pi_step(state, 0.0, 0.0, 0.01) == (-0.3, 0.2)
    assert state == PiState(integ_v=0.3, integ_i=-0.2)


def test_integrator_accumulates_error():
    ctrl = PiController(PiConfig(kp_v=0.0, ki_v=1.0, kp_i=0.0, ki_i=1.0))
    state = PiState()
    for _ in range(100):
        r_v, r_i = ctrl.pi_step(state, 0.1, 0.1, 0.01)
    assert state.integ_v == pytest.approx(0.1)
    assert r_v == pytest.approx(-0.1)
    assert r_i == pytest.approx(-0.1)


def test_integrators_are_clamped():
    ctrl = PiController(PiConfig(clamp=0.5))
    state = PiState()
    for _ in range(1000):
        ctrl.pi_step(state, 1.0, -1.0, 0.01)
    assert state.integ_v == 0.5
    assert state.integ_i == -0.5


def test_positive_current_error_lowers_droop(controller):
    _, r_i = controller.pi_step(PiState(), 0.0, 0.2, 0.01)
    assert r_i < 0


def test_warm_states_reproduce_offsets(controller):
    offsets = np.array([-0.4, 0.9])
    states = controller.warm_states(offsets)
    outputs = [sum(controller.pi_step(s, 0.0, 0.0, 0.01)) for s in states]
    np.testing.assert_allclose(outputs, offsets)
    assert states[0].integ_v == states[1].integ_v


def test_same_inputs_give_same_outputs(controller):
    a, b = PiState(), PiState()
    first = [controller.pi_step(a, 0.05, -0.1, 0.01) for _ in range(10)]
    second = [controller.pi_step(b, 0.05, -0.1, 0.01) for _ in range(10)]
    assert first == second


def test_bumpless_integrator_cancels_proportional_term(controller):
    integ = controller.bumpless_integrator(0.1, 0.3)
    assert -(0.1 * 0.3 + integ) == pytest.approx(0.0)


def test_non_positive_period_is_rejected(controller):
    with pytest.raises(ModelInvalidError):
        controller.pi_step(PiState(), 0.0, 0.0, 0.0)

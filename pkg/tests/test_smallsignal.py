"""
Reduced sensitivity models and their finite-difference check against the plant.
"""

import numpy as np
import pytest

from app.core.exceptions import ModelInvalidError
from app.models.schemas import LineParams
from app.services.plant import equilibrium
from app.services.smallsignal import (
    FirstOrderTf,
    OperatingPoint,
    current_sensitivity,
    validate_against_plant,
    voltage_sensitivity,
)

LINE = LineParams(r=0.5, l=0.003)


def _op(i_op, r_d=1.0):
    return OperatingPoint(i_op=i_op, r_d=r_d, line=LINE, tau_v=0.005)


def test_voltage_dc_gain():
    assert voltage_sensitivity(_op(7.5)).dc_gain == pytest.approx(-7.5)


def test_voltage_pole():
    assert voltage_sensitivity(_op(15.0)).pole_a == pytest.approx(-200.0)


def test_current_dc_gain():
    assert current_sensitivity(_op(6.0)).dc_gain == pytest.approx(-4.0)


def test_current_time_constant():
    assert current_sensitivity(_op(6.0)).time_constant == pytest.approx(0.007)


@pytest.mark.parametrize("sensitivity", [voltage_sensitivity, current_sensitivity])
def test_zero_current_gives_zero_transfer_function(sensitivity):
    tf = sensitivity(_op(0.0))
    assert tf.gain_b == 0.0
    assert tf.response(1j * 50.0) == 0


@pytest.mark.parametrize("i_op", [-5.0, 0.5, 12.0])
def test_poles_are_stable_and_gains_oppose_current(i_op):
    for tf in (voltage_sensitivity(_op(i_op)), current_sensitivity(_op(i_op))):
        assert tf.pole_a < 0
        assert np.sign(tf.dc_gain) == -np.sign(i_op)


def test_current_sensitivity_rejects_non_positive_resistance():
    with pytest.raises(ModelInvalidError):
        current_sensitivity(_op(5.0, r_d=-0.7))


def test_unstable_pole_is_rejected():
    with pytest.raises(ModelInvalidError):
        FirstOrderTf(gain_b=1.0, pole_a=0.0)


def test_finite_difference_matches_analytic_gains(network):
    # converter 1 at the 3 kW conventional-droop operating point
    state = equilibrium(network, np.array([1.0, 2.0]))
    check = validate_against_plant(_op(float(state.i_line[0]), r_d=1.0), 0.01)
    assert check.voltage_error < 0.05
    assert check.current_error < 0.05


def test_finite_difference_is_repeatable():
    a = validate_against_plant(_op(4.0), 0.01)
    b = validate_against_plant(_op(4.0), 0.01)
    assert a == b


@pytest.mark.parametrize("perturbation", [0.0, -0.01, 0.02])
def test_invalid_perturbation_is_rejected(perturbation):
    with pytest.raises(ModelInvalidError):
        validate_against_plant(_op(4.0), perturbation)


def test_negative_operating_current_is_rejected():
    with pytest.raises(ModelInvalidError):
        validate_against_plant(_op(-4.0), 0.01)

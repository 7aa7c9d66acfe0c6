import math

import pytest
from hypothesis import given, settings, strategies as st

from sebrake.errors import SingularRadicand
from sebrake.plant import (NOMINAL, BrakeState, PlantParams, Regime, clip_spool,
                           output, plant_deriv, radicand, regime_of)

# small hand-checkable parameter set
HAND = PlantParams(T_L_A=1.0, T_sup_A=2.0, T_L_B=1.0, T_sup_B=2.0, alpha=1.0, p_lp=9.0,
                   K_v=1.0, D_v=0.5, omega_v=10.0)


@pytest.mark.parametrize("x_v, expected", [(0.5, Regime.A), (-0.5, Regime.B), (0.0, Regime.A)])
def test_regime_of(x_v, expected):
    assert regime_of(x_v) is expected


def test_radicand_case_a():
    assert radicand(BrakeState(10, 35, 0, 0), Regime.A, HAND) == 16


def test_radicand_case_b():
    assert radicand(BrakeState(10, 35, 0, 0), Regime.B, HAND) == 36


def test_radicand_zero_is_singular():
    p = PlantParams(alpha=1.0, p_lp=0.0)
    with pytest.raises(SingularRadicand):
        radicand(BrakeState(30, 30, 0, 0), Regime.A, p)


def test_plant_deriv_at_rest_is_zero():
    assert plant_deriv(BrakeState(10, 30, 0, 0), 0.0, NOMINAL) == (0, 0, 0, 0)


def test_plant_deriv_hand_values():
    d = plant_deriv(BrakeState(10, 35, 0, 2), 3.0, HAND)
    assert d == pytest.approx((8, 16, 100, 0))


def test_input_only_moves_valve_velocity():
    s = BrakeState(10, 35, 0, 2)
    rates = [plant_deriv(s, u, HAND) for u in (-1.0, 0.0, 1.0)]
    assert rates[0][:2] == rates[1][:2] == rates[2][:2]


@pytest.mark.parametrize("p_sup, expected", [(35, 35), (0, 0), (91, 91)])
def test_output_is_supply_pressure(p_sup, expected):
    assert output(BrakeState(10, p_sup, 0, 0)) == expected


envelope_states = st.builds(
    BrakeState,
    p_L=st.floats(1.5, 18.5),
    p_sup=st.floats(21.5, 109.5),
    v_v=st.floats(-16, 16),
    x_v=st.floats(-1, 1),
)


@given(s=envelope_states)
def test_regimes_agree_at_closed_spool(s):
    s = s._replace(x_v=0.0)
    assert plant_deriv(s, 0.7, NOMINAL, Regime.A) == plant_deriv(s, 0.7, NOMINAL, Regime.B)


@given(s=envelope_states, u=st.floats(-10, 10))
def test_affine_in_input(s, u):
    d0 = plant_deriv(s, 0.0, NOMINAL)
    d1 = plant_deriv(s, u, NOMINAL)
    slope = NOMINAL.omega_v ** 2 * NOMINAL.K_v
    assert d1.dv_v - d0.dv_v == pytest.approx(slope * u, rel=1e-12, abs=1e-9)
    assert (d1.dp_L, d1.dp_sup, d1.dx_v) == (d0.dp_L, d0.dp_sup, d0.dx_v)


@given(s=envelope_states.filter(lambda s: abs(s.x_v) > 1e-6))
def test_pressure_rates_share_ratio(s):
    d = plant_deriv(s, 0.0, NOMINAL)
    T_L, T_sup = NOMINAL.gains(regime_of(s.x_v))
    assert d.dp_L / d.dp_sup == pytest.approx(T_L / T_sup, rel=1e-12)


@settings(max_examples=50)
@given(s=envelope_states)
def test_derivatives_finite(s):
    assert all(math.isfinite(v) for v in plant_deriv(s, 1.0, NOMINAL))


def test_nominal_params_are_valid():
    assert NOMINAL.violations() == []


def test_violations_name_the_key():
    bad = PlantParams(alpha=0.0, T_sup_B=-1.0)
    keys = {k for k, _ in bad.violations()}
    assert {"plant.alpha", "plant.T_sup_B"} <= keys


def test_clip_spool_zeroes_velocity_at_stop():
    s = clip_spool(BrakeState(3, 27, 5.0, 1.2), NOMINAL)
    assert s == (3, 27, 0.0, 1.0)
    s = clip_spool(BrakeState(3, 27, -5.0, -1.2), NOMINAL)
    assert s == (3, 27, 0.0, -1.0)
    assert clip_spool(BrakeState(3, 27, 5.0, 0.5), NOMINAL) == (3, 27, 5.0, 0.5)

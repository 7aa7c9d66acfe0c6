import numpy as np
import pytest

from sebrake.errors import SingularRadicand
from sebrake.normal_form import (a_of, b_of, certify, inverse_M, jacobian_M,
                                 jacobian_M_numeric, lie_oracle, q_of,
                                 relative_degree, sample_envelope_states,
                                 to_normal, transform_H)
from sebrake.plant import NOMINAL, BrakeState, PlantParams, Regime, regime_of

HAND = PlantParams(T_L_A=1.0, T_sup_A=2.0, T_L_B=-1.0, T_sup_B=-2.0, alpha=1.0, p_lp=9.0,
                   K_v=1.0, D_v=0.5, omega_v=10.0)


@pytest.fixture(scope="module")
def states():
    return sample_envelope_states(NOMINAL, 100, np.random.default_rng(7))


def test_transform_hand_values():
    assert transform_H(BrakeState(10, 35, 0, 2), HAND) == pytest.approx((35, 16, 4))


def test_transform_at_rest():
    assert transform_H(BrakeState(8, 40, 0, 0), NOMINAL) == (40, 0, 0)


def test_a_hand_value():
    assert a_of(BrakeState(10, 35, 0, 2), HAND) == pytest.approx(-1600)


def test_a_at_rest():
    assert a_of(BrakeState(8, 40, 0, 0), NOMINAL) == 0


def test_b_hand_value():
    assert b_of(BrakeState(10, 35, 0, 2), HAND) == pytest.approx(800)


def test_b_positive_in_case_a(states):
    assert all(b_of(s, NOMINAL) > 0 for s in states if s.x_v >= 0)


@pytest.mark.parametrize("z2, regime, expected", [
    (16, Regime.A, 8),
    (0, Regime.A, 0),
    (0, Regime.B, 0),
    (-10, Regime.B, -5),
])
def test_q_of(z2, regime, expected):
    assert q_of(z2, regime, HAND) == pytest.approx(expected)


def test_inverse_hand_value():
    assert inverse_M(10, (35, 16, 4), Regime.A, HAND) == pytest.approx((10, 35, 0, 2))


def test_inverse_at_rest():
    assert inverse_M(8, (40, 0, 0), Regime.A, NOMINAL) == (8, 40, 0, 0)


def test_inverse_singular():
    with pytest.raises(SingularRadicand):
        inverse_M(40, (40.5, 1, 0), Regime.A, NOMINAL)


def test_round_trip(states):
    for s in states:
        eta, *z = to_normal(s, NOMINAL)
        back = inverse_M(eta, z, regime_of(s.x_v), NOMINAL)
        assert back == pytest.approx(s, rel=1e-9, abs=1e-12)


def test_jacobian_nonsingular_and_matches_fd(states):
    for s in states:
        J, det = jacobian_M(s, NOMINAL)
        assert abs(det) > 0
        assert det == pytest.approx(np.linalg.det(J), rel=1e-9)
        assert np.allclose(J, jacobian_M_numeric(s, NOMINAL), rtol=1e-6, atol=1e-6)
        assert np.linalg.matrix_rank(J[1:]) == 3


def test_jacobian_determinant_vanishes_with_radicand():
    dets = []
    for gap in (1.0, 1e-2, 1e-4, 1e-6):
        s = BrakeState(10.0, 10.0 + 0.5 + gap, 0.0, 0.3)
        dets.append(abs(jacobian_M(s, NOMINAL)[1]))
    assert dets == sorted(dets, reverse=True)
    assert dets[-1] < 1e-2


def test_case_b_uses_rederived_coefficient():
    # the printed variant (alpha*T_sup - T_L) disagrees with the oracle
    s = BrakeState(10.0, 60.0, 3.0, -0.4)
    rep = lie_oracle(s, 0.0, NOMINAL)
    T_L, T_sup = NOMINAL.T_L_B, NOMINAL.T_sup_B
    sq = (s.p_L + NOMINAL.alpha * s.p_sup - NOMINAL.p_lp) ** 0.5
    printed = 0.5 * T_sup * (NOMINAL.alpha * T_sup - T_L) * s.x_v ** 2 + T_sup * s.v_v * sq
    assert transform_H(s, NOMINAL)[2] == pytest.approx(rep.Lf2_h, rel=1e-8)
    assert abs(printed - rep.Lf2_h) > 1e-3 * abs(rep.Lf2_h)


def test_oracle_matches_closed_forms(states):
    for s in states:
        rep = lie_oracle(s, 0.5, NOMINAL)
        assert rep.max_rel_error < 1e-6, rep.rel_errors
        assert abs(rep.Lg_h) < 1e-8
        assert abs(rep.Lg_Lf_h) < 1e-8
        assert abs(rep.Lg_Lf2_h - b_of(s, NOMINAL)) / abs(b_of(s, NOMINAL)) < 1e-5


def test_oracle_sees_both_regimes(states):
    regimes = {lie_oracle(s, 0.0, NOMINAL).regime for s in states[:20]}
    assert regimes == {Regime.A, Regime.B}


def test_relative_degree_is_three(states):
    assert {relative_degree(s, NOMINAL) for s in states[:10]} == {3}


def test_certify_summary():
    summary = certify(NOMINAL, n=20, seed=3)
    assert summary.relative_degrees == {3}
    assert max(summary.max_rel_errors.values()) < 1e-6
    assert summary.n_states == 20

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from sebrake.errors import ConjugacyViolation, EnvelopeViolation, UnstablePoleRequest
from sebrake.integrate import rk4_step
from sebrake.linear_control import (A, B, C, ControllerGains, control_nu,
                                    eta_hat_deriv, observer_deriv,
                                    pole_place_controller, pole_place_observer,
                                    reference_state)
from sebrake.plant import NOMINAL, PlantParams, Regime


def matched_error(eigs, poles):
    # greedy matching is enough for well separated random poles
    remaining = list(np.asarray(poles, dtype=complex))
    worst = 0.0
    for e in eigs:
        d = [abs(e - p) / max(1.0, abs(p)) for p in remaining]
        i = int(np.argmin(d))
        worst = max(worst, d[i])
        remaining.pop(i)
    return worst


@pytest.mark.parametrize("poles, K", [([-2, -2, -2], (8, 12, 6)), ([-1, -1, -1], (1, 3, 3))])
def test_controller_gains(poles, K):
    assert pole_place_controller(poles).K_z == pytest.approx(K)


@pytest.mark.parametrize("poles, K", [([-5, -5, -5], (15, 75, 125)), ([-1, -1, -1], (3, 3, 1))])
def test_observer_gains(poles, K):
    assert pole_place_observer(poles).K_obs == pytest.approx(K)


def test_rejects_unstable():
    with pytest.raises(UnstablePoleRequest):
        pole_place_controller([-1, -2, 0])


def test_rejects_unpaired_complex():
    with pytest.raises(ConjugacyViolation):
        pole_place_controller([-1, -2 + 1j, -2 + 1j])


pole_sets = st.one_of(
    st.lists(st.floats(-60, -0.5), min_size=3, max_size=3),
    st.tuples(st.floats(-60, -0.5), st.floats(-60, -0.5), st.floats(0.5, 60)).map(
        lambda t: [t[0], complex(t[1], t[2]), complex(t[1], -t[2])]),
)


@settings(max_examples=60)
@given(poles=pole_sets)
def test_gain_eigenvalue_duality(poles):
    p = np.asarray(poles, dtype=complex)
    # eigenvalues of near-repeated roots are ill-conditioned; keep the
    # property to separated poles
    if min(abs(a - b) for i, a in enumerate(p) for b in p[i + 1:]) < 0.5:
        return
    Kc = pole_place_controller(poles)
    Ko = pole_place_observer(poles)
    assert all(isinstance(v, float) for v in Kc.K_z + Ko.K_obs)
    assert matched_error(np.linalg.eigvals(Kc.closed_loop), p) < 1e-9
    assert matched_error(np.linalg.eigvals(Ko.error_matrix), p) < 1e-9


@pytest.mark.parametrize("p, z", [(27, (27, 0, 0)), (91, (91, 0, 0))])
def test_reference_state(p, z):
    assert reference_state(p) == z


def test_reference_state_outside_envelope():
    with pytest.raises(EnvelopeViolation):
        reference_state(0)


def test_control_nu():
    K = pole_place_controller([-2, -2, -2])
    assert control_nu(K, (59, 0, 0), (59, 0, 0)) == 0
    assert control_nu(K, (59, 0, 0), (27, 0, 0)) == pytest.approx(256)


@given(e=st.tuples(*[st.floats(-100, 100)] * 3))
def test_control_nu_linear(e):
    K = ControllerGains((512.0, 192.0, 24.0))
    zero = (0.0, 0.0, 0.0)
    one = control_nu(K, e, zero)
    two = control_nu(K, tuple(2 * v for v in e), zero)
    assert two == pytest.approx(2 * one, rel=1e-12, abs=1e-9)


def test_observer_deriv():
    L = pole_place_observer([-5, -5, -5])
    assert observer_deriv((30.0, 0.0, 0.0), 0.0, 30.0, L) == (0, 0, 0)
    assert observer_deriv((0.0, 0.0, 0.0), 0.0, 1.0, L) == pytest.approx((15, 75, 125))


def test_observer_error_follows_error_matrix():
    L = pole_place_observer([-40, -40, -40])
    dt = 1e-4
    z = (30.0, 0.0, 0.0)
    zh = (30.0, -10.0, -100.0)

    def plant(_t, s):
        return tuple(A @ np.array(s) + B.ravel() * 50.0)

    for k in range(500):
        y = z[0]
        zh = rk4_step(lambda _t, s: observer_deriv(s, 50.0, y, L), zh, k * dt, dt)
        z = rk4_step(plant, z, k * dt, dt)
    e = np.array(z) - np.array(zh)
    # observer samples y at the step start, so agreement is first order in dt
    expected = expm(L.error_matrix * 0.05) @ np.array([0.0, 10.0, 100.0])
    assert e == pytest.approx(expected, rel=2e-2, abs=1e-3)


def test_eta_hat_deriv():
    ratio_half = PlantParams(T_L_A=1.0, T_sup_A=2.0)
    assert eta_hat_deriv(0.0, Regime.A, NOMINAL) == 0
    assert eta_hat_deriv(16.0, Regime.A, ratio_half) == pytest.approx(8)


def test_eta_error_constant_with_exact_z():
    # both the true and estimated load pressure integrate the same rate
    dt, eta, eta_hat = 1e-3, 5.0, 3.0
    for k in range(200):
        z2 = 20.0 * np.sin(k * dt * 7)
        eta += dt * eta_hat_deriv(z2, Regime.A, NOMINAL)
        eta_hat += dt * eta_hat_deriv(z2, Regime.A, NOMINAL)
    assert eta - eta_hat == pytest.approx(2.0, abs=1e-12)


def test_linear_closed_loop_error_decays():
    # controller + observer on the exact triple integrator
    K = pole_place_controller([-8, -8, -8])
    L = pole_place_observer([-40, -40, -40])
    z_star = (59.0, 0.0, 0.0)
    dt = 1e-3
    s = (27.0, 0.0, 0.0, 27.0, 0.0, 0.0)
    norms = []
    for k in range(3000):
        z, zh = s[:3], s[3:]
        nu = control_nu(K, z_star, zh)

        def rate(_t, v):
            return (v[1], v[2], nu) + observer_deriv(v[3:], nu, v[0], L)

        s = rk4_step(rate, s, k * dt, dt)
        norms.append(np.linalg.norm(np.subtract(z_star, s[:3])))
    t = dt * np.arange(1, 3001)
    # polynomial prefactor of a triple pole folded into C
    bound = 32.0 * 30 * np.exp(-8 * t) * (1 + 8 * t + (8 * t) ** 2)
    assert np.all(np.array(norms) <= bound)
    assert norms[-1] < 1e-4


def test_matrices_shapes():
    assert A.shape == (3, 3) and B.shape == (3, 1) and C.shape == (1, 3)

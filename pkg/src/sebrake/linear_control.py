"""Pole placement and the full-order observer for the triple integrator.

The linearized input-output model is ``z' = A z + b nu``, ``y = c^T z`` with
``A`` the 3x3 shift matrix, ``b = (0, 0, 1)^T`` and ``c^T = (1, 0, 0)``.
Both pairs are in companion form, so the gains are read directly off the
characteristic polynomial of the requested poles.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConjugacyViolation, EnvelopeViolation, UnstablePoleRequest
from .normal_form import q_of
from .plant import NOMINAL

A = np.array([[0.0, 1.0, 0.0],
              [0.0, 0.0, 1.0],
              [0.0, 0.0, 0.0]])
B = np.array([[0.0], [0.0], [1.0]])
C = np.array([[1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class ControllerGains:
    """Row gain ``K_z`` acting on ``e = z* - z``."""

    K_z: tuple

    @property
    def closed_loop(self):
        return A - B @ np.atleast_2d(self.K_z)


@dataclass(frozen=True)
class ObserverGains:
    """Column gain ``K_obs`` on the output innovation."""

    K_obs: tuple

    @property
    def error_matrix(self):
        return A - np.atleast_2d(self.K_obs).T @ C


@dataclass
class ObserverState:
    z_hat: tuple
    eta_hat: float


def _check_poles(poles, tol=1e-9):
    p = np.asarray(poles, dtype=complex).ravel()
    if p.size != 3:
        raise ValueError(f"need exactly 3 poles, got {p.size}")
    if np.any(p.real >= 0):
        raise UnstablePoleRequest(f"poles must have negative real part: {poles}")
    scale = max(1.0, float(np.max(np.abs(p))))
    unmatched = list(p)
    while unmatched:
        q = unmatched.pop()
        if abs(q.imag) <= tol * scale:
            continue
        dist = [abs(q.conjugate() - r) for r in unmatched]
        if not dist or min(dist) > tol * scale:
            raise ConjugacyViolation(f"pole {q} has no conjugate partner in {poles}")
        unmatched.pop(int(np.argmin(dist)))
    return p


def characteristic_coeffs(poles):
    """``(c2, c1, c0)`` of the monic ``s^3 + c2 s^2 + c1 s + c0``."""
    coeffs = np.poly(_check_poles(poles))
    return tuple(float(v) for v in np.real(coeffs[1:]))


def pole_place_controller(poles):
    """State-feedback gains placing the eigenvalues of ``A - b K_z``.

    >>> pole_place_controller([-2, -2, -2]).K_z
    (8.0, 12.0, 6.0)
    """
    c2, c1, c0 = characteristic_coeffs(poles)
    return ControllerGains((c0, c1, c2))


def pole_place_observer(poles):
    """Observer gains placing the eigenvalues of ``A - K_obs c^T``."""
    c2, c1, c0 = characteristic_coeffs(poles)
    return ObserverGains((c2, c1, c0))


def reference_state(p_ref, envelope=None):
    """Reference for the integrator chain under a piecewise-constant setpoint."""
    env = envelope if envelope is not None else NOMINAL.envelope
    if not env.p_sup_min <= p_ref <= env.p_sup_max:
        raise EnvelopeViolation(
            f"p_ref={p_ref} outside [{env.p_sup_min}, {env.p_sup_max}] bar")
    return (float(p_ref), 0.0, 0.0)


def control_nu(gains, z_star, z_hat):
    """``nu = K_z (z* - z_hat)``."""
    k0, k1, k2 = gains.K_z
    return (k0 * (z_star[0] - z_hat[0]) + k1 * (z_star[1] - z_hat[1])
            + k2 * (z_star[2] - z_hat[2]))


def observer_deriv(z_hat, nu, y_meas, gains):
    """Rate of the full-order observer, ``A z_hat + b nu + K_obs (y - z_hat1)``."""
    l0, l1, l2 = gains.K_obs
    innov = y_meas - z_hat[0]
    return (z_hat[1] + l0 * innov,
            z_hat[2] + l1 * innov,
            nu + l2 * innov)


def eta_hat_deriv(z_hat2, regime, params):
    """Rate of the load-pressure estimate, driven by the estimated ``z2``."""
    return q_of(z_hat2, regime, params)

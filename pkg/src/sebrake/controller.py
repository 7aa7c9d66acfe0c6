"""Feedback-linearizing pressure controller and the proportional baseline.

Each sample the controller

1. advances the observer (and the load-pressure estimate) by one step,
2. rebuilds a plant-state estimate through the inverse coordinate map,
3. computes ``nu`` for the integrator chain from the estimated ``z``,
4. converts ``nu`` to a valve command with ``u = (nu - a(x)) / b(x)``.
"""

from dataclasses import dataclass, field
from functools import cached_property

from .errors import SingularRadicand
from .integrate import rk4_step
from .linear_control import (ObserverState, control_nu, eta_hat_deriv,
                             observer_deriv, pole_place_controller,
                             pole_place_observer, reference_state)
from .normal_form import a_of, b_of, inverse_M, regime_for, transform_H
from .plant import Regime, regime_of

REGIME_SOURCES = ("estimated", "measured")


@dataclass(frozen=True)
class ControllerConfig:
    controller_poles: tuple = (-8.0, -8.0, -8.0)
    observer_poles: tuple = (-40.0, -40.0, -40.0)
    u_sat: float = 10.0
    baseline_gain: float = 0.05
    regime_source: str = "estimated"
    # initial load-pressure estimate; None means p_lp
    eta_hat0: float | None = None
    # samples to hold the last command through a singular estimate
    max_hold_steps: int = 50

    @cached_property
    def gains(self):
        return pole_place_controller(self.controller_poles)

    @cached_property
    def observer_gains(self):
        return pole_place_observer(self.observer_poles)

    def violations(self, prefix="controller"):
        out = []
        for key in ("controller_poles", "observer_poles"):
            try:
                pole_place_controller(getattr(self, key))
            except ValueError as exc:
                out.append((f"{prefix}.{key}", str(exc)))
        if not self.u_sat > 0:
            out.append((f"{prefix}.u_sat", "must be > 0"))
        if not self.baseline_gain > 0:
            out.append((f"{prefix}.baseline_gain", "must be > 0"))
        if self.regime_source not in REGIME_SOURCES:
            out.append((f"{prefix}.regime_source", f"must be one of {REGIME_SOURCES}"))
        if not (isinstance(self.max_hold_steps, int) and self.max_hold_steps >= 0):
            out.append((f"{prefix}.max_hold_steps", "must be a non-negative integer"))
        return out


@dataclass
class FblControllerState:
    obs: ObserverState
    last_u: float = 0.0
    last_nu: float = 0.0
    regime_used: Regime = Regime.A
    saturated: bool = False
    hold_count: int = 0
    failed: bool = False
    started: bool = False
    diagnostics: list = field(default_factory=list)


def init_controller(y0, cfg, params):
    """Observer starts at ``(y0, 0, 0)``; the load-pressure estimate at
    ``cfg.eta_hat0`` (or ``p_lp`` when unset)."""
    eta0 = params.p_lp if cfg.eta_hat0 is None else cfg.eta_hat0
    return FblControllerState(obs=ObserverState((float(y0), 0.0, 0.0), float(eta0)))


def saturate(u, u_sat):
    if u > u_sat:
        return u_sat, True
    if u < -u_sat:
        return -u_sat, True
    return u, False


def linearizing_u(nu, state_est, params, u_sat=float("inf"), regime=None):
    """Valve command that makes ``z3' = nu``; returns ``(u, saturated)``.

    Raises:
        SingularRadicand: if the estimate lies where ``b(x)`` vanishes.
    """
    if regime is None:
        regime = regime_of(state_est[3])
    a = a_of(state_est, params, regime)
    b = b_of(state_est, params, regime)
    return saturate((nu - a) / b, u_sat)


def _command(ctrl, cfg, params, nu, regime, t, estimate):
    # estimate() builds the state fed to the linearizing law; it may raise
    # SingularRadicand just like a_of/b_of
    try:
        u, sat = linearizing_u(nu, estimate(), params, cfg.u_sat, regime)
        ctrl.hold_count = 0
    except SingularRadicand as exc:
        ctrl.hold_count += 1
        ctrl.diagnostics.append((t, str(exc)))
        sat = False
        if ctrl.hold_count > cfg.max_hold_steps:
            u = 0.0
            ctrl.failed = True
        else:
            u = ctrl.last_u
    ctrl.last_u = u
    ctrl.last_nu = nu
    ctrl.regime_used = regime
    ctrl.saturated = sat
    return u


def controller_step(y_meas, p_ref, ctrl, cfg, params, dt, x_v_meas=None, t=0.0):
    """One sample of the observer-based linearizing controller.

    ``ctrl`` is updated in place and also returned.  The first call only
    computes a command from the initial estimate; later calls first
    integrate the observer over ``dt`` with the previous ``nu`` held.
    ``x_v_meas`` is consulted only when ``cfg.regime_source == "measured"``.

    Returns:
        ``(u, ctrl)``
    """
    obs = ctrl.obs
    if ctrl.started:
        gains = cfg.observer_gains
        nu_prev = ctrl.last_nu

        def rate(_t, s):
            z = s[:3]
            dz = observer_deriv(z, nu_prev, y_meas, gains)
            # sign(z2) matches sign(x_v) for positive supply gains; q is
            # continuous across the switch since it is zero at z2 = 0
            return dz + (eta_hat_deriv(s[1], regime_of(s[1]), params),)

        s = rk4_step(rate, obs.z_hat + (obs.eta_hat,), t, dt)
        obs.z_hat, obs.eta_hat = s[:3], s[3]
    ctrl.started = True

    if cfg.regime_source == "measured" and x_v_meas is not None:
        regime = regime_of(x_v_meas)
    else:
        regime = regime_for(obs.eta_hat, obs.z_hat, params)
    nu = control_nu(cfg.gains, reference_state(p_ref, params.envelope), obs.z_hat)
    u = _command(ctrl, cfg, params, nu, regime, t,
                 lambda: inverse_M(obs.eta_hat, obs.z_hat, regime, params))
    return u, ctrl


def exact_state_step(state, p_ref, ctrl, cfg, params, t=0.0):
    """Linearizing control with the true plant state (observer bypassed).

    The observer slots of ``ctrl`` are overwritten with the exact
    ``(z, eta)`` so traces stay comparable.
    """
    regime = regime_of(state[3])
    z = transform_H(state, params, regime)
    ctrl.obs.z_hat, ctrl.obs.eta_hat = z, state[0]
    ctrl.started = True
    nu = control_nu(cfg.gains, reference_state(p_ref, params.envelope), z)
    return _command(ctrl, cfg, params, nu, regime, t, lambda: state), ctrl


def baseline_p_controller(y_meas, p_ref, gain, u_sat=float("inf")):
    """Proportional pressure controller, clipped to ``+-u_sat``."""
    return saturate(gain * (p_ref - y_meas), u_sat)[0]

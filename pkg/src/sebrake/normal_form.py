"""Normal-form coordinates of the brake model and a numeric Lie-derivative oracle.

With ``h(x) = p_sup`` the output has relative degree 3: ``L_g h`` and
``L_g L_f h`` vanish identically, so

    z1 = h,  z2 = L_f h,  z3 = L_f^2 h,  dz3/dt = a(x) + b(x) u

with ``a = L_f^3 h`` and ``b = L_g L_f^2 h``.  The load pressure
``eta = p_L`` completes the coordinate set; its rate depends on ``z2`` only.

Writing ``r`` for the active radicand and ``r' = c * x_v * sqrt(r)`` for its
rate along the drift, the coefficient ``c`` is ``T_sup - T_L`` in case A and
``T_L + alpha * T_sup`` in case B.  Every closed form below is expressed
through ``c``; :func:`lie_oracle` checks them independently.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import mpmath
import numpy as np

from .errors import EnvelopeViolation, SingularRadicand
from .plant import (BrakeState, Regime, drift, input_field, radicand,
                    radicand_value, regime_of)


class NormalCoords(NamedTuple):
    eta: float
    z1: float
    z2: float
    z3: float


def radicand_rate_coeff(regime, params):
    """Coefficient ``c`` with ``dr/dt = c * x_v * sqrt(r)`` along the drift."""
    T_L, T_sup = params.gains(regime)
    if regime is Regime.A:
        return T_sup - T_L
    return T_L + params.alpha * T_sup


def _radicand_grad(regime, params):
    # (dr/dp_L, dr/dp_sup)
    if regime is Regime.A:
        return -1.0, 1.0
    return 1.0, params.alpha


def transform_H(state, params, regime=None):
    """Output and its first two derivatives, ``(z1, z2, z3)``."""
    if regime is None:
        regime = regime_of(state[3])
    _, p_sup, v_v, x_v = state
    sq = radicand(state, regime, params) ** 0.5
    T_sup = params.gains(regime)[1]
    c = radicand_rate_coeff(regime, params)
    return (p_sup,
            T_sup * x_v * sq,
            0.5 * T_sup * c * x_v * x_v + T_sup * v_v * sq)


def to_normal(state, params, regime=None):
    """Full map ``M(x) = (eta, z1, z2, z3)``."""
    return NormalCoords(state[0], *transform_H(state, params, regime))


def a_of(state, params, regime=None):
    """Drift part of the third output derivative, ``L_f^3 h``."""
    if regime is None:
        regime = regime_of(state[3])
    _, _, v_v, x_v = state
    sq = radicand(state, regime, params) ** 0.5
    T_sup = params.gains(regime)[1]
    c = radicand_rate_coeff(regime, params)
    w = params.omega_v
    return (1.5 * T_sup * c * v_v * x_v
            - T_sup * (2 * params.D_v * w * v_v + w * w * x_v) * sq)


def b_of(state, params, regime=None):
    """Input gain of the third output derivative, ``L_g L_f^2 h``."""
    if regime is None:
        regime = regime_of(state[3])
    sq = radicand(state, regime, params) ** 0.5
    return params.gains(regime)[1] * sq * params.omega_v ** 2 * params.K_v


def q_of(z2, regime, params):
    """Internal dynamics: ``d(eta)/dt = (T_L / T_sup) * z2``."""
    T_L, T_sup = params.gains(regime)
    return T_L / T_sup * z2


def inverse_M(eta, z, regime, params):
    """Recover the plant state from ``(eta, z1, z2, z3)``.

    Raises:
        SingularRadicand: where ``sqrt(r)`` vanishes; the map is not
            invertible there.
    """
    z1, z2, z3 = z
    r = radicand_value(eta, z1, regime, params)
    if not r > 0:
        raise SingularRadicand(r, regime)
    T_sup = params.gains(regime)[1]
    k = T_sup * r ** 0.5
    x_v = z2 / k
    v_v = (z3 - 0.5 * T_sup * radicand_rate_coeff(regime, params) * x_v * x_v) / k
    return BrakeState(eta, z1, v_v, x_v)


def regime_for(eta, z, params):
    """Regime whose inverse map yields a spool position of matching sign.

    Falls back to the sign of ``z2`` when neither case is consistent
    (only possible with a negative supply flow gain).
    """
    for regime in (Regime.A, Regime.B):
        r = radicand_value(eta, z[0], regime, params)
        if r > 0:
            x_v = z[1] / (params.gains(regime)[1] * r ** 0.5)
            if regime_of(x_v) is regime:
                return regime
    return regime_of(z[1])


def jacobian_M(state, params, regime=None):
    """Analytic Jacobian of ``M(x)`` and its determinant.

    The determinant is ``-T_sup**2 * r``, so it vanishes exactly where the
    radicand does.
    """
    if regime is None:
        regime = regime_of(state[3])
    _, _, v_v, x_v = state
    r = radicand(state, regime, params)
    sq = r ** 0.5
    T_sup = params.gains(regime)[1]
    c = radicand_rate_coeff(regime, params)
    dr_L, dr_sup = _radicand_grad(regime, params)
    J = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [T_sup * x_v * dr_L / (2 * sq), T_sup * x_v * dr_sup / (2 * sq), 0.0, T_sup * sq],
        [T_sup * v_v * dr_L / (2 * sq), T_sup * v_v * dr_sup / (2 * sq), T_sup * sq, T_sup * c * x_v],
    ])
    return J, -T_sup * T_sup * r


def jacobian_M_numeric(state, params, regime=None, rel_step=1e-6):
    """Central-difference Jacobian of ``M(x)``, for cross-checking."""
    if regime is None:
        regime = regime_of(state[3])
    x = np.asarray(state, dtype=float)
    J = np.empty((4, 4))
    for j in range(4):
        step = rel_step * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        J[:, j] = (np.array(to_normal(xp, params, regime))
                   - np.array(to_normal(xm, params, regime))) / (2 * step)
    return J


# --- numeric oracle -------------------------------------------------------

@dataclass
class LieOracleReport:
    """Numeric Lie derivatives at one state and their closed-form mismatch.

    ``rel_errors`` maps a closed-form name to its relative error against
    the oracle; the denominator is the sum of the absolute values of the
    closed form's terms so that states where a value happens to be near
    zero do not inflate the figure.
    """

    regime: Regime
    Lg_h: float
    Lg_Lf_h: float
    Lf_h: float
    Lf2_h: float
    Lf3_h: float
    Lg_Lf2_h: float
    Lf_eta: float
    y3_probe: float
    Lg_h_scaled: float
    Lg_Lf_h_scaled: float
    rel_errors: dict = field(default_factory=dict)
    max_abs_error_vs_closed_form: float = 0.0

    @property
    def max_rel_error(self):
        return max(self.rel_errors.values())


def state_scale(params):
    """Characteristic magnitude of each state component."""
    env = params.envelope
    return (env.p_L_max, env.p_sup_max, params.omega_v * params.x_v_max, params.x_v_max)


def _lie(phi, field_fn, scale, h_step):
    """Central-difference directional derivative of ``phi`` along ``field_fn``."""
    def d(x):
        v = field_fn(x)
        m = max(abs(vi) / si for vi, si in zip(v, scale))
        eps = h_step / m if m else h_step
        xp = tuple(a + eps * b for a, b in zip(x, v))
        xm = tuple(a - eps * b for a, b in zip(x, v))
        return (phi(xp) - phi(xm)) / (2 * eps)
    return d


def _lie_richardson(phi, field_fn, scale, h_step):
    coarse = _lie(phi, field_fn, scale, h_step)
    fine = _lie(phi, field_fn, scale, h_step / 2)
    return lambda x: (4 * fine(x) - coarse(x)) / 3


def _check_margin(state, params, h_step):
    env = params.envelope
    scale = state_scale(params)
    m_L, m_sup = 4 * h_step * scale[0], 4 * h_step * scale[1]
    if not (env.p_L_min + m_L <= state[0] <= env.p_L_max - m_L
            and env.p_sup_min + m_sup <= state[1] <= env.p_sup_max - m_sup):
        raise EnvelopeViolation(
            f"state ({state[0]:g}, {state[1]:g}) not inside envelope with margin")


def lie_oracle(state, u_probe, params, h_step=1e-4, dps=40):
    """Certify the closed forms at ``state`` by nested numeric differentiation.

    Each Lie derivative is a chain of central differences of ``h`` along
    the vector fields; the outermost level is Richardson-extrapolated once.
    Arithmetic runs at ``dps`` decimal digits so that the nested
    differences do not drown in double-precision round-off.  The fields are
    frozen to the regime of ``state``.

    ``u_probe`` is a constant input for an extra check of
    ``y''' = a + b * u``.
    """
    _check_margin(state, params, h_step)
    regime = regime_of(state[3])
    scale = state_scale(params)
    g_vec = input_field(params)

    with mpmath.workdps(dps):
        x = tuple(mpmath.mpf(float(v)) for v in state)
        hs = mpmath.mpf(h_step)
        u_mp = mpmath.mpf(float(u_probe))

        def f_fn(s):
            return drift(s, params, regime)

        def g_fn(s):
            return g_vec

        def fu_fn(s):
            f = drift(s, params, regime)
            return tuple(fi + gi * u_mp for fi, gi in zip(f, g_vec))

        def h(s):
            return s[1]

        def eta(s):
            return s[0]

        Lf = _lie(h, f_fn, scale, hs)
        Lf2 = _lie(Lf, f_fn, scale, hs)
        vals = {
            "Lf_h": Lf(x),
            "Lf2_h": Lf2(x),
            "Lf3_h": _lie_richardson(Lf2, f_fn, scale, hs)(x),
            "Lg_h": _lie(h, g_fn, scale, hs)(x),
            "Lg_Lf_h": _lie(Lf, g_fn, scale, hs)(x),
            "Lg_Lf2_h": _lie_richardson(Lf2, g_fn, scale, hs)(x),
            "Lf_eta": _lie(eta, f_fn, scale, hs)(x),
        }
        Lfu = _lie(h, fu_fn, scale, hs)
        Lfu2 = _lie(Lfu, fu_fn, scale, hs)
        vals["y3_probe"] = _lie_richardson(Lfu2, fu_fn, scale, hs)(x)
        vals = {k: float(v) for k, v in vals.items()}

    # closed forms in double precision, term magnitudes for relative errors
    _, _, v_v, x_v = state
    sq = radicand(state, regime, params) ** 0.5
    T_L, T_sup = params.gains(regime)
    c = radicand_rate_coeff(regime, params)
    w = params.omega_v
    z1, z2, z3 = transform_H(state, params, regime)
    a = a_of(state, params, regime)
    b = b_of(state, params, regime)
    q = q_of(z2, regime, params)
    mags = {
        "z2": abs(z2),
        "z3": abs(0.5 * T_sup * c * x_v * x_v) + abs(T_sup * v_v * sq),
        "a": (abs(1.5 * T_sup * c * v_v * x_v) + abs(T_sup * 2 * params.D_v * w * v_v * sq)
              + abs(T_sup * w * w * x_v * sq)),
        "b": abs(b),
        "q": abs(q),
    }
    mags["y3"] = mags["a"] + abs(b * u_probe)
    pairs = {
        "z2": (vals["Lf_h"], z2),
        "z3": (vals["Lf2_h"], z3),
        "a": (vals["Lf3_h"], a),
        "b": (vals["Lg_Lf2_h"], b),
        "q": (vals["Lf_eta"], q),
        "y3": (vals["y3_probe"], a + b * u_probe),
    }
    abs_err = {k: abs(num - cf) for k, (num, cf) in pairs.items()}
    rel = {k: (abs_err[k] / mags[k] if mags[k] > 0 else abs_err[k]) for k in pairs}
    return LieOracleReport(
        regime=regime,
        Lg_h_scaled=abs(vals["Lg_h"]) * w * w / abs(b),
        Lg_Lf_h_scaled=abs(vals["Lg_Lf_h"]) * w / abs(b),
        rel_errors=rel,
        max_abs_error_vs_closed_form=max(abs_err.values()),
        **vals,
    )


def relative_degree(state, params, tol=1e-8, h_step=1e-4):
    """Smallest ``k`` with ``L_g L_f^(k-1) h`` numerically nonzero (scaled)."""
    rep = lie_oracle(state, 0.0, params, h_step=h_step)
    if rep.Lg_h_scaled > tol:
        return 1
    if rep.Lg_Lf_h_scaled > tol:
        return 2
    if abs(rep.Lg_Lf2_h) > 0:
        return 3
    return None


def sample_envelope_states(params, n, rng, margin=0.02, min_opening=0.02):
    """Random states inside the envelope, away from its edges.

    Spool positions avoid a band of ``min_opening * x_v_max`` around zero
    so that each sample sits clearly in one regime.
    """
    env = params.envelope
    dL = margin * (env.p_L_max - env.p_L_min)
    dS = margin * (env.p_sup_max - env.p_sup_min)
    p_L = rng.uniform(env.p_L_min + dL, env.p_L_max - dL, n)
    p_sup = rng.uniform(env.p_sup_min + dS, env.p_sup_max - dS, n)
    vmax = params.omega_v * params.x_v_max
    v_v = rng.uniform(-vmax, vmax, n)
    x_v = rng.choice([-1.0, 1.0], n) * rng.uniform(min_opening, 1.0, n) * params.x_v_max
    return [BrakeState(*map(float, s)) for s in zip(p_L, p_sup, v_v, x_v)]


@dataclass
class OracleSummary:
    n_states: int
    max_Lg_h_scaled: float
    max_Lg_Lf_h_scaled: float
    max_rel_errors: dict
    relative_degrees: set
    regimes: dict

    def lines(self):
        out = [f"states checked         {self.n_states}",
               f"regimes                A={self.regimes.get('A', 0)} B={self.regimes.get('B', 0)}",
               f"max |Lg h| (scaled)    {self.max_Lg_h_scaled:.3e}",
               f"max |Lg Lf h| (scaled) {self.max_Lg_Lf_h_scaled:.3e}"]
        for k, v in self.max_rel_errors.items():
            out.append(f"max rel err {k:<10} {v:.3e}")
        out.append(f"relative degree        {sorted(self.relative_degrees)}")
        return out


def certify(params, n=200, seed=0, u_probe=1.0, h_step=1e-4):
    """Run :func:`lie_oracle` over ``n`` random envelope states."""
    rng = np.random.default_rng(seed)
    states = sample_envelope_states(params, n, rng)
    max_rel = {}
    lg = lgf = 0.0
    degrees = set()
    regimes = {}
    for s in states:
        rep = lie_oracle(s, u_probe, params, h_step=h_step)
        lg = max(lg, rep.Lg_h_scaled)
        lgf = max(lgf, rep.Lg_Lf_h_scaled)
        for k, v in rep.rel_errors.items():
            max_rel[k] = max(max_rel.get(k, 0.0), v)
        degrees.add(1 if rep.Lg_h_scaled > 1e-8 else 2 if rep.Lg_Lf_h_scaled > 1e-8 else 3)
        regimes[rep.regime.value] = regimes.get(rep.regime.value, 0) + 1
    return OracleSummary(n, lg, lgf, max_rel, degrees, regimes)

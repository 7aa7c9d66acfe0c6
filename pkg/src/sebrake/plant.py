"""Fourth-order nonlinear model of the self-energizing electro-hydraulic brake.

State ``x = (p_L, p_sup, v_v, x_v)``; input ``u`` is the valve command;
output ``y = p_sup``.  Units: bar, mm, mm/s, seconds.  The flow gains
``T_*`` absorb every flow-equation unit conversion.

The model switches between two sets of flow equations on the sign of the
spool position:

* case A (``x_v >= 0``): radicand ``p_sup - p_L - alpha * p_lp``
* case B (``x_v < 0``):  radicand ``p_L + alpha * p_sup - p_lp``

Functions here accept plain floats or any real type supporting ``**``
(``mpmath.mpf`` is used by the Lie-derivative oracle).
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

from .errors import SingularRadicand


class Regime(str, Enum):
    """Valve opening direction."""

    A = "A"
    B = "B"

    def __str__(self):
        return self.value


def regime_of(x_v):
    """Case A for ``x_v >= 0`` (the boundary goes to A), case B otherwise."""
    return Regime.A if x_v >= 0 else Regime.B


class BrakeState(NamedTuple):
    p_L: float
    p_sup: float
    v_v: float
    x_v: float


class StateDeriv(NamedTuple):
    dp_L: float
    dp_sup: float
    dv_v: float
    dx_v: float


@dataclass(frozen=True)
class Envelope:
    """Operating box for the two pressures, in bar."""

    p_L_min: float = 1.0
    p_L_max: float = 19.0
    p_sup_min: float = 21.0
    p_sup_max: float = 110.0

    def contains(self, p_L, p_sup):
        return (self.p_L_min <= p_L <= self.p_L_max
                and self.p_sup_min <= p_sup <= self.p_sup_max)


@dataclass(frozen=True)
class PlantParams:
    """Constant plant parameters plus the operating envelope.

    Construction does not validate; call :meth:`violations` (the config
    loader does).  This lets the pure formulas be exercised with
    arbitrary numbers.
    """

    T_L_A: float = 6.0
    T_sup_A: float = 30.0
    T_L_B: float = 6.6
    T_sup_B: float = 33.0
    alpha: float = 0.5
    p_lp: float = 1.0
    K_v: float = 0.35
    D_v: float = 0.4
    omega_v: float = 16.0
    x_v_max: float = 1.0
    envelope: Envelope = field(default_factory=Envelope)

    def gains(self, regime):
        """``(T_L, T_sup)`` for the given regime."""
        if regime is Regime.A:
            return self.T_L_A, self.T_sup_A
        return self.T_L_B, self.T_sup_B

    def perturbed(self, factor_A=1.0, factor_B=1.0):
        """Copy with the supply-line flow gains scaled (friction mismatch)."""
        return replace(self, T_sup_A=self.T_sup_A * factor_A,
                       T_sup_B=self.T_sup_B * factor_B)

    def violations(self, prefix="plant"):
        """List of ``(key_path, message)`` for every broken invariant."""
        out = []

        def bad(key, msg):
            out.append((f"{prefix}.{key}", msg))

        if not self.omega_v > 0:
            bad("omega_v", "must be > 0")
        if not self.D_v > 0:
            bad("D_v", "must be > 0")
        if not self.K_v > 0:
            bad("K_v", "must be > 0")
        if not 0 < self.alpha <= 1:
            bad("alpha", "must lie in (0, 1]")
        if not self.p_lp >= 0:
            bad("p_lp", "must be >= 0")
        if not self.x_v_max > 0:
            bad("x_v_max", "must be > 0")
        if not self.T_L_A > 0:
            bad("T_L_A", "must be > 0")
        if not self.T_sup_A > self.T_L_A:
            bad("T_sup_A", "must exceed T_L_A (case A radicand must grow)")
        # positive, so that a negative opening lowers both pressures
        if not self.T_L_B > 0:
            bad("T_L_B", "must be > 0")
        if not self.T_sup_B > 0:
            bad("T_sup_B", "must be > 0")

        env = self.envelope
        if not env.p_L_min < env.p_L_max:
            bad("p_L_min", "must be below p_L_max")
        if not env.p_sup_min < env.p_sup_max:
            bad("p_sup_min", "must be below p_sup_max")
        # both radicands are monotone in each pressure, so the box corners
        # that minimize them are enough
        r_a = env.p_sup_min - env.p_L_max - self.alpha * self.p_lp
        r_b = env.p_L_min + self.alpha * env.p_sup_min - self.p_lp
        if not r_a > 0:
            bad("p_L_max", f"case A radicand {r_a:g} <= 0 at envelope corner")
        if not r_b > 0:
            bad("p_L_min", f"case B radicand {r_b:g} <= 0 at envelope corner")
        return out


NOMINAL = PlantParams()


def radicand_value(p_L, p_sup, regime, params):
    """Radicand without the positivity check."""
    if regime is Regime.A:
        return p_sup - p_L - params.alpha * params.p_lp
    return p_L + params.alpha * p_sup - params.p_lp


def radicand(state, regime, params):
    """Pressure difference under the square root for ``regime``.

    Raises:
        SingularRadicand: if the value is ``<= 0``.
    """
    r = radicand_value(state[0], state[1], regime, params)
    if not r > 0:
        raise SingularRadicand(r, regime)
    return r


def drift(state, params, regime=None):
    """Drift field ``f(x)`` as a 4-tuple.

    ``regime`` defaults to the one selected by ``state.x_v``; pass it
    explicitly to evaluate the smooth extension of one case's equations.
    """
    p_L, p_sup, v_v, x_v = state
    if regime is None:
        regime = regime_of(x_v)
    sq = radicand(state, regime, params) ** 0.5
    T_L, T_sup = params.gains(regime)
    w = params.omega_v
    return (T_L * x_v * sq,
            T_sup * x_v * sq,
            -2 * params.D_v * w * v_v - w * w * x_v,
            v_v)


def input_field(params):
    """Input vector field ``g(x)``; constant for this plant."""
    return (0.0, 0.0, params.omega_v ** 2 * params.K_v, 0.0)


def plant_deriv(state, u, params, regime=None):
    """``f(x) + g(x) u`` as a :class:`StateDeriv`."""
    f = drift(state, params, regime)
    return StateDeriv(f[0], f[1], f[2] + params.omega_v ** 2 * params.K_v * u, f[3])


def output(state):
    """Measured output: the supply-line pressure."""
    return state[1]


def clip_spool(state, params):
    """Apply the spool end stop; velocity is zeroed when the stop engages."""
    lim = params.x_v_max
    if state[3] > lim:
        return BrakeState(state[0], state[1], 0.0, lim)
    if state[3] < -lim:
        return BrakeState(state[0], state[1], 0.0, -lim)
    return BrakeState(*state)

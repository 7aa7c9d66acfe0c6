"""Fixed-step classical Runge-Kutta integration."""

from .errors import StageEvaluationFailure


def rk4_step(deriv, state, t, dt):
    """Advance ``state`` by one classical RK4 step.

    ``deriv(t, state)`` returns a sequence of rates the same length as
    ``state``.  Works on tuples of floats (the simulation hot path) or any
    sequence; always returns a tuple.

    Raises:
        StageEvaluationFailure: if ``deriv`` raises at any stage; the
            original exception is chained.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    half = 0.5 * dt
    try:
        stage = 1
        k1 = deriv(t, state)
        stage = 2
        k2 = deriv(t + half, tuple(x + half * k for x, k in zip(state, k1)))
        stage = 3
        k3 = deriv(t + half, tuple(x + half * k for x, k in zip(state, k2)))
        stage = 4
        k4 = deriv(t + dt, tuple(x + dt * k for x, k in zip(state, k3)))
    except Exception as exc:
        raise StageEvaluationFailure(stage, t, exc) from exc
    sixth = dt / 6.0
    return tuple(x + sixth * (a + 2.0 * b + 2.0 * c + d)
                 for x, a, b, c, d in zip(state, k1, k2, k3, k4))

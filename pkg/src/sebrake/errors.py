"""Exception types raised across the package."""


class SingularRadicand(ValueError):
    """A square-root pressure difference is zero or negative.

    The flow equations, the coordinate map and the linearizing law all
    carry a ``sqrt(r)`` factor; ``r <= 0`` means the state left the valid
    operating region.
    """

    def __init__(self, value, regime=None):
        self.value = value
        self.regime = regime
        where = f" (case {regime})" if regime is not None else ""
        super().__init__(f"radicand {value!r} <= 0{where}")


class EnvelopeViolation(ValueError):
    """A pressure lies outside the configured operating envelope."""


class UnstablePoleRequest(ValueError):
    """A requested closed-loop pole is not strictly in the left half-plane."""


class ConjugacyViolation(ValueError):
    """A pole set is not closed under complex conjugation."""


class StageEvaluationFailure(RuntimeError):
    """The derivative function raised inside a Runge-Kutta stage."""

    def __init__(self, stage, t, cause):
        self.stage = stage
        self.t = t
        self.cause = cause
        super().__init__(f"RK4 stage {stage} failed at t={t:.6g}: {cause}")


class SimulationDiverged(RuntimeError):
    """A state magnitude exceeded the divergence guard."""

    def __init__(self, t, message, trace=None):
        self.t = t
        self.trace = trace
        super().__init__(f"t={t:.6g}: {message}")


class ControllerFailure(RuntimeError):
    """The controller could not produce a valid command and gave up."""

    def __init__(self, t, message, trace=None):
        self.t = t
        self.trace = trace
        super().__init__(f"t={t:.6g}: {message}")


class SegmentTooShort(ValueError):
    """A trace segment has too few samples to compute step metrics."""


class NonPositiveForce(ValueError):
    """A brake force of zero or less was given to the force map."""


class ConfigParseError(ValueError):
    """Malformed configuration text."""

    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class ConfigValidationError(ValueError):
    """One or more configuration invariants are violated.

    ``violations`` holds ``(key_path, message)`` pairs, all of them, not
    just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(f"  {key}: {msg}" for key, msg in self.violations)
        super().__init__(f"{len(self.violations)} invalid setting(s):\n{lines}")

"""Closed-loop simulation, step metrics and robustness sweeps.

Plant and controller share one fixed time grid.  At every grid point the
controller produces a command from the current measurement; the command
is held while the plant is advanced one RK4 step.
"""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import (ControllerConfig, baseline_p_controller,
                         controller_step, exact_state_step, init_controller)
from .errors import (ControllerFailure, SegmentTooShort, SimulationDiverged,
                     StageEvaluationFailure)
from .integrate import rk4_step
from .plant import BrakeState, clip_spool, plant_deriv

__all__ = [
    "CSV_HEADER", "Scenario", "StepMetrics", "SweepResult", "Trace",
    "match_baseline_gain", "rise_time", "rk4_step", "robustness_sweep",
    "run_closed_loop", "segment_metrics", "step_metrics",
]

CONTROLLER_KINDS = ("fbl", "baseline", "fbl-exact")

PAPER_SCHEDULE = ((0.0, 27.0), (2.0, 59.0), (4.0, 91.0), (6.0, 59.0), (8.0, 27.0))

CSV_HEADER = ("t", "p_ref", "p_sup", "p_L", "x_v", "v_v", "u", "nu",
              "zhat1", "zhat2", "zhat3", "eta_hat", "regime", "saturated")


@dataclass(frozen=True)
class Scenario:
    """Reference schedule and integration settings for one run.

    ``perturbation`` scales ``(T_sup_A, T_sup_B)`` of the simulated plant
    only; the controller keeps the nominal values.
    """

    schedule: tuple = PAPER_SCHEDULE
    duration: float = 10.0
    dt: float = 1e-4
    initial_state: BrakeState = BrakeState(3.0, 27.0, 0.0, 0.0)
    perturbation: tuple = (1.0, 1.0)

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def segment_starts(self):
        return tuple(int(round(t0 / self.dt)) for t0, _ in self.schedule)

    def with_dt(self, dt):
        return replace(self, dt=dt)

    def violations(self, envelope, prefix="scenario"):
        out = []
        if not self.dt > 0:
            out.append((f"{prefix}.dt", "must be > 0"))
        if not self.duration > 0:
            out.append((f"{prefix}.duration", "must be > 0"))
        times = [t for t, _ in self.schedule]
        if not times:
            out.append((f"{prefix}.schedule", "must not be empty"))
        elif times[0] != 0:
            out.append((f"{prefix}.schedule", "first entry must start at t = 0"))
        if any(b <= a for a, b in zip(times, times[1:])):
            out.append((f"{prefix}.schedule", "times must be strictly increasing"))
        if times and self.duration > 0 and times[-1] >= self.duration:
            out.append((f"{prefix}.schedule", "last entry starts after the run ends"))
        for _, p in self.schedule:
            if not envelope.p_sup_min <= p <= envelope.p_sup_max:
                out.append((f"{prefix}.schedule", f"p_ref {p:g} outside envelope"))
        s = self.initial_state
        if not envelope.contains(s.p_L, s.p_sup):
            out.append((f"{prefix}.initial_state", "pressures outside envelope"))
        if any(not f > 0 for f in self.perturbation):
            out.append((f"{prefix}.perturbation", "factors must be > 0"))
        return out


@dataclass
class Trace:
    """Column-oriented simulation record on a uniform time grid.

    Estimate columns (``nu``, ``zhat``, ``eta_hat``) are NaN for the
    baseline controller.
    """

    t: np.ndarray
    p_ref: np.ndarray
    p_sup: np.ndarray
    p_L: np.ndarray
    x_v: np.ndarray
    v_v: np.ndarray
    u: np.ndarray
    nu: np.ndarray
    zhat: np.ndarray
    eta_hat: np.ndarray
    regime: np.ndarray
    saturated: np.ndarray
    segment_starts: tuple = (0,)
    controller: str = "fbl"
    diagnostics: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    @property
    def n_segments(self):
        return len(self.segment_starts)

    def segment_slice(self, k):
        """Rows of segment ``k``, including the first row of the next one."""
        start = self.segment_starts[k]
        stop = self.segment_starts[k + 1] + 1 if k + 1 < self.n_segments else len(self.t)
        return slice(start, stop)

    def rows(self):
        for i in range(len(self.t)):
            yield (self.t[i], self.p_ref[i], self.p_sup[i], self.p_L[i], self.x_v[i],
                   self.v_v[i], self.u[i], self.nu[i], self.zhat[i, 0], self.zhat[i, 1],
                   self.zhat[i, 2], self.eta_hat[i], self.regime[i], self.saturated[i])

    def write_csv(self, fh):
        """Write the fixed-schema CSV to a path or an open text file."""
        if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
            with open(fh, "w", newline="") as f:
                return self.write_csv(f)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.rows():
            w.writerow([_fmt(v) for v in row[:12]] + [row[12], "1" if row[13] else "0"])

    def to_csv_text(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _fmt(v):
    return "" if math.isnan(v) else f"{v:.9g}"


def run_closed_loop(scenario, params, cfg=None, controller="fbl", guard=10.0):
    """Simulate plant plus controller over the scenario.

    Args:
        scenario: reference schedule, grid and initial state.
        params: nominal plant parameters (the controller's model).
        cfg: controller configuration; defaults to ``ControllerConfig()``.
        controller: ``"fbl"`` (observer-based), ``"fbl-exact"`` (true-state
            feedback) or ``"baseline"`` (proportional).
        guard: abort once a state exceeds ``guard`` times its bound.

    Raises:
        SimulationDiverged: on guard violation or if the plant leaves the
            region where its flow equations are defined.
        ControllerFailure: when the linearizing controller gives up after
            holding its last command through a singular estimate.
    """
    if controller not in CONTROLLER_KINDS:
        raise ValueError(f"unknown controller {controller!r}")
    cfg = cfg or ControllerConfig()
    plant = params.perturbed(*scenario.perturbation)
    env = params.envelope
    lim_L, lim_sup = guard * env.p_L_max, guard * env.p_sup_max
    lim_v = guard * params.omega_v * params.x_v_max

    dt = scenario.dt
    n = scenario.n_steps
    starts = scenario.segment_starts()
    refs = [p for _, p in scenario.schedule]

    x = clip_spool(scenario.initial_state, plant)
    ctrl = init_controller(x[1], cfg, params)
    nan = float("nan")
    cols = {name: [] for name in ("t", "p_ref", "p_sup", "p_L", "x_v", "v_v", "u",
                                  "nu", "z1", "z2", "z3", "eta_hat", "regime", "sat")}
    col_lists = [cols[name] for name in cols]
    seg = 0

    def partial_trace():
        return _build_trace(cols, starts, controller, ctrl.diagnostics)

    for k in range(n + 1):
        t = k * dt
        while seg + 1 < len(starts) and k >= starts[seg + 1]:
            seg += 1
        p_ref = refs[seg]
        if controller == "baseline":
            u = baseline_p_controller(x[1], p_ref, cfg.baseline_gain, cfg.u_sat)
            sat = abs(u) >= cfg.u_sat
            nu = z1 = z2 = z3 = eta = nan
        else:
            if controller == "fbl":
                u, _ = controller_step(x[1], p_ref, ctrl, cfg, params, dt,
                                       x_v_meas=x[3], t=t)
            else:
                u, _ = exact_state_step(x, p_ref, ctrl, cfg, params, t=t)
            if ctrl.failed:
                raise ControllerFailure(t, "linearizing law singular for too long",
                                        partial_trace())
            sat = ctrl.saturated
            nu = ctrl.last_nu
            z1, z2, z3 = ctrl.obs.z_hat
            eta = ctrl.obs.eta_hat
        row = (t, p_ref, x[1], x[0], x[3], x[2], u, nu, z1, z2, z3, eta,
               "A" if x[3] >= 0 else "B", sat)
        for col, v in zip(col_lists, row):
            col.append(v)
        if k == n:
            break

        try:
            x = rk4_step(lambda _t, s: plant_deriv(s, u, plant), x, t, dt)
        except StageEvaluationFailure as exc:
            raise SimulationDiverged(t, f"plant left its valid region: {exc.cause}",
                                     partial_trace()) from exc
        x = clip_spool(x, plant)
        if not (abs(x[0]) <= lim_L and abs(x[1]) <= lim_sup and abs(x[2]) <= lim_v):
            raise SimulationDiverged(t + dt, f"state {tuple(x)} beyond guard",
                                     partial_trace())
    return partial_trace()


def _build_trace(cols, starts, controller, diagnostics):
    m = len(cols["t"])
    return Trace(
        t=np.array(cols["t"]),
        p_ref=np.array(cols["p_ref"]),
        p_sup=np.array(cols["p_sup"]),
        p_L=np.array(cols["p_L"]),
        x_v=np.array(cols["x_v"]),
        v_v=np.array(cols["v_v"]),
        u=np.array(cols["u"]),
        nu=np.array(cols["nu"]),
        zhat=np.column_stack([cols["z1"], cols["z2"], cols["z3"]]) if m else np.empty((0, 3)),
        eta_hat=np.array(cols["eta_hat"]),
        regime=np.array(cols["regime"], dtype="<U1"),
        saturated=np.array(cols["sat"], dtype=bool),
        segment_starts=tuple(s for s in starts if s < m) or (0,),
        controller=controller,
        diagnostics=list(diagnostics),
    )


# --- metrics ----------------------------------------------------------------

@dataclass
class StepMetrics:
    """Step-response figures for one reference segment.

    ``overshoot`` is a percentage of the step magnitude.  ``settling_time``
    is measured from the segment start and is ``inf`` when the response
    ends outside the band.
    """

    p_ref: float
    step: float
    overshoot: float
    settling_time: float
    settled: bool
    steady_state_error: float
    zero_crossings_of_dy: int
    rise_time: float

    def aperiodic(self, max_overshoot=1.0, max_crossings=1):
        return (self.settled and self.overshoot <= max_overshoot
                and self.zero_crossings_of_dy <= max_crossings)


def rise_time(t, y, y0, y1, lo=0.1, hi=0.9):
    """Time between first crossings of the ``lo`` and ``hi`` fractions.

    Returns ``inf`` if either level is never reached.
    """
    d = y1 - y0
    if d == 0:
        return 0.0
    frac = (np.asarray(y) - y0) / d
    above_lo = np.flatnonzero(frac >= lo)
    above_hi = np.flatnonzero(frac >= hi)
    if not above_lo.size or not above_hi.size:
        return math.inf
    return float(t[above_hi[0]] - t[above_lo[0]])


def count_sign_changes(dy, tol):
    """Sign changes of ``dy`` ignoring samples with ``|dy| <= tol``."""
    s = np.sign(dy[np.abs(dy) > tol])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def segment_metrics(t, y, p_ref, step, band=0.02, dy_tol=1e-3):
    """Metrics for one response ``y(t)`` towards ``p_ref``.

    ``step`` is the reference change that started the segment.  When it is
    zero (a hold segment) the band is taken relative to ``|p_ref|``.
    ``dy_tol`` sets the derivative deadband for the zero-crossing count as
    a fraction of the band reference per second.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 10:
        raise SegmentTooShort(f"segment has {len(y)} samples, need >= 10")
    t = t - t[0]
    mag = abs(step)
    if step > 0:
        overshoot = max(0.0, (y.max() - p_ref) / mag * 100.0)
    elif step < 0:
        overshoot = max(0.0, (p_ref - y.min()) / mag * 100.0)
    else:
        overshoot = 0.0
    ref_mag = mag if mag > 0 else abs(p_ref)
    inside = np.abs(y - p_ref) <= band * ref_mag
    settled = bool(inside[-1])
    if settled:
        outside = np.flatnonzero(~inside)
        settling = float(t[outside[-1] + 1]) if outside.size else 0.0
    else:
        settling = math.inf
    crossings = 0
    if inside.any():
        first = int(np.argmax(inside))
        dy = np.diff(y[first:]) / np.diff(t[first:])
        crossings = count_sign_changes(dy, dy_tol * ref_mag)
    return StepMetrics(
        p_ref=float(p_ref),
        step=float(step),
        overshoot=float(overshoot),
        settling_time=settling,
        settled=settled,
        steady_state_error=float(abs(y[-1] - p_ref)),
        zero_crossings_of_dy=crossings,
        rise_time=rise_time(t, y, p_ref - step, p_ref) if mag > 0 else 0.0,
    )


def step_metrics(trace, segment, band=0.02, dy_tol=1e-3):
    """Metrics of ``trace`` over reference segment ``segment``."""
    if not 0 <= segment < trace.n_segments:
        raise SegmentTooShort(f"segment {segment} does not exist")
    sl = trace.segment_slice(segment)
    p_ref = float(trace.p_ref[sl.start])
    if segment > 0:
        step = p_ref - float(trace.p_ref[sl.start - 1])
    else:
        step = p_ref - float(trace.p_sup[sl.start])
    return segment_metrics(trace.t[sl], trace.p_sup[sl], p_ref, step, band, dy_tol)


def all_step_metrics(trace, **kw):
    return [step_metrics(trace, k, **kw) for k in range(trace.n_segments)]


# --- sweeps and tuning --------------------------------------------------------

@dataclass
class SweepResult:
    factor: float
    metrics: list | None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None and all(m.settled for m in self.metrics)


def _sweep_one(args):
    scenario, params, cfg, controller, factor = args
    sc = replace(scenario, perturbation=(factor, factor))
    try:
        trace = run_closed_loop(sc, params, cfg, controller)
    except (SimulationDiverged, ControllerFailure) as exc:
        return SweepResult(factor, None, f"{type(exc).__name__}: {exc}")
    return SweepResult(factor, all_step_metrics(trace))


def robustness_sweep(scenario, params, cfg=None, factors=(0.9, 0.95, 1.05, 1.1),
                     controller="fbl", workers=1):
    """Rerun ``scenario`` with the plant's supply flow gains scaled.

    One :class:`SweepResult` per factor, in input order.  Failed runs are
    recorded and the sweep continues.
    """
    factors = [float(f) for f in factors]
    if any(not f > 0 for f in factors):
        raise ValueError("perturbation factors must be > 0")
    cfg = cfg or ControllerConfig()
    jobs = [(scenario, params, cfg, controller, f) for f in factors]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_one, jobs))
    return [_sweep_one(j) for j in jobs]


def match_baseline_gain(params, cfg=None, p_from=27.0, p_to=59.0, duration=2.0,
                        dt=1e-4, p_L0=None, rel_tol=0.02, max_iter=40):
    """Proportional gain whose 10-90 % rise time matches the linearizing loop.

    Both controllers run a single ``p_from -> p_to`` step from rest.
    Bisection in log-gain, assuming the rise time falls as the gain grows.

    Returns:
        ``(gain, baseline_rise, fbl_rise)``
    """
    cfg = cfg or ControllerConfig()
    p_L0 = 3.0 if p_L0 is None else p_L0
    sc = Scenario(schedule=((0.0, p_to),), duration=duration, dt=dt,
                  initial_state=BrakeState(p_L0, p_from, 0.0, 0.0))
    target = rise_time(*_tr(run_closed_loop(sc, params, cfg, "fbl")), p_from, p_to)

    def rise_for(gain):
        tr = run_closed_loop(sc, params, replace(cfg, baseline_gain=gain), "baseline")
        return rise_time(*_tr(tr), p_from, p_to)

    lo, hi = 1e-4, 1e-2
    while rise_for(hi) > target:
        lo, hi = hi, hi * 4
        if hi > 1e3:
            raise RuntimeError("no proportional gain reaches the target rise time")
    gain, rise = hi, rise_for(hi)
    for _ in range(max_iter):
        if abs(rise - target) <= rel_tol * target:
            break
        gain = math.sqrt(lo * hi)
        rise = rise_for(gain)
        if rise > target:
            lo = gain
        else:
            hi = gain
    return gain, rise, target


def _tr(trace):
    return trace.t, trace.p_sup

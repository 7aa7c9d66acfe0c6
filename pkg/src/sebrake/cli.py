"""Command-line front end.

Subcommands: ``run``, ``sweep``, ``compare``, ``validate``, ``oracle``.
Exit status is 0 only when every requested run finished and every
segment settled (or, for ``oracle``, every closed form passed).
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config, with_dt
from .errors import (ConfigParseError, ConfigValidationError, ControllerFailure,
                     SimulationDiverged)
from .normal_form import certify
from .sim import all_step_metrics, robustness_sweep, run_closed_loop

log = logging.getLogger("sebrake")

ORACLE_REL_TOL = 1e-5
ORACLE_ZERO_TOL = 1e-8


def format_table(header, rows):
    """Plain-text table with columns padded to the widest cell."""
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells) + "\n"


def _g(v, spec=".4g"):
    return format(v, spec)


METRIC_HEADER = ("segment", "p_ref", "step", "overshoot_%", "settling_s", "settled",
                 "ss_error", "dy_crossings", "rise_s")


def metrics_rows(metrics):
    return [(i, _g(m.p_ref), _g(m.step), _g(m.overshoot), _g(m.settling_time),
             "yes" if m.settled else "no", _g(m.steady_state_error),
             m.zero_crossings_of_dy, _g(m.rise_time)) for i, m in enumerate(metrics)]


def _run_one(rc, kind, out_dir):
    """Run one controller; returns ``(metrics or None, ok)``."""
    path = out_dir / f"trace_{kind}.csv"
    try:
        trace = run_closed_loop(rc.scenario, rc.plant, rc.controller, kind)
    except (SimulationDiverged, ControllerFailure) as exc:
        log.error("%s run failed: %s", kind, exc)
        if exc.trace is not None and len(exc.trace):
            exc.trace.write_csv(path)
        return None, False
    trace.write_csv(path)
    metrics = all_step_metrics(trace)
    return metrics, all(m.settled for m in metrics)


def _write(path, text):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def run_command(rc, out_dir=None, kind=None):
    """Run the configured scenario(s) and write traces and summaries.

    Returns the process exit status.
    """
    out_dir = Path(out_dir or rc.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = kind or rc.controller_kind
    kinds = ("fbl", "baseline") if kind == "both" else (kind,)
    results = {k: _run_one(rc, k, out_dir) for k in kinds}

    parts = []
    for k, (metrics, _) in results.items():
        parts.append(f"[{k}]\n")
        parts.append(format_table(METRIC_HEADER, metrics_rows(metrics)) if metrics
                     else "run failed\n")
    _write(out_dir / "metrics.txt", "".join(parts))

    if kind == "both":
        fbl, base = results["fbl"][0], results["baseline"][0]
        header = ("segment", "p_ref", "overshoot_fbl", "overshoot_base",
                  "crossings_fbl", "crossings_base", "settling_fbl", "settling_base")
        rows = []
        if fbl and base:
            for i, (a, b) in enumerate(zip(fbl, base)):
                rows.append((i, _g(a.p_ref), _g(a.overshoot), _g(b.overshoot),
                             a.zero_crossings_of_dy, b.zero_crossings_of_dy,
                             _g(a.settling_time), _g(b.settling_time)))
        _write(out_dir / "comparison.txt", format_table(header, rows))

    ok = all(flag for _, flag in results.values())
    print((out_dir / "metrics.txt").read_text(), end="")
    return 0 if ok else 1


def sweep_command(rc, factors, out_dir=None, workers=1):
    out_dir = Path(out_dir or rc.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = robustness_sweep(rc.scenario, rc.plant, rc.controller, factors,
                               workers=workers)
    header = ("factor", "status", "max_overshoot_%", "max_settling_s",
              "max_dy_crossings", "max_ss_error")
    rows = []
    for r in results:
        if r.metrics is None:
            rows.append((_g(r.factor), "failed", "-", "-", "-", "-"))
            continue
        rows.append((_g(r.factor), "ok" if r.ok else "unsettled",
                     _g(max(m.overshoot for m in r.metrics)),
                     _g(max(m.settling_time for m in r.metrics)),
                     max(m.zero_crossings_of_dy for m in r.metrics),
                     _g(max(m.steady_state_error for m in r.metrics))))
    table = format_table(header, rows)
    _write(out_dir / "sweep.txt", table)
    print(table, end="")
    return 0 if all(r.ok for r in results) else 1


def oracle_command(rc, seed, n):
    summary = certify(rc.plant, n=n, seed=seed)
    print("\n".join(summary.lines()))
    ok = (summary.max_Lg_h_scaled < ORACLE_ZERO_TOL
          and summary.max_Lg_Lf_h_scaled < ORACLE_ZERO_TOL
          and all(v < ORACLE_REL_TOL for v in summary.max_rel_errors.values())
          and summary.relative_degrees == {3})
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _factors(text):
    return tuple(float(p) for p in text.split(",") if p.strip())


def build_parser():
    p = argparse.ArgumentParser(prog="sebrake", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (default: shipped nominal config)")
    common.add_argument("--out", help="output directory (default: run.output_path)")
    common.add_argument("--dt", type=float, help="override the integration step [s]")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run one scenario")
    run.add_argument("--controller", choices=("fbl", "baseline", "both"))
    sweep = sub.add_parser("sweep", parents=[common], help="robustness sweep over T_sup factors")
    sweep.add_argument("--factors", type=_factors, help="comma-separated factors")
    sweep.add_argument("--workers", type=int, default=1)
    sub.add_parser("compare", parents=[common], help="linearizing vs proportional controller")
    sub.add_parser("validate", parents=[common], help="check a config and exit")
    oracle = sub.add_parser("oracle", parents=[common], help="certify the closed forms")
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--n", type=int, default=200, help="number of random states")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        rc = load_config(args.config)
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.dt is not None:
        rc = with_dt(rc, args.dt)
        problems = rc.violations()
        if problems:
            print(f"invalid config: {ConfigValidationError(problems)}", file=sys.stderr)
            return 2

    try:
        if args.command == "validate":
            print("config OK")
            return 0
        if args.command == "run":
            return run_command(rc, args.out, args.controller)
        if args.command == "compare":
            return run_command(rc, args.out, "both")
        if args.command == "sweep":
            factors = args.factors or rc.sweep_factors
            return sweep_command(replace(rc, sweep_factors=factors), factors,
                                 args.out, args.workers)
        if args.command == "oracle":
            return oracle_command(rc, args.seed, args.n)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())

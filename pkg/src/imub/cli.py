"""Command-line entry point.

Points of E are written ``axis1:<m>``, ``axis2:<m>`` or ``origin``; points of
the quadrant as ``x1,x2``.  A JSON file passed with ``--config`` supplies
defaults using the flag names (dashes or underscores); explicit flags win.

Exit codes: 0 when every verdict passes, 1 when any fails, 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import checks
from .brownian import DEFAULT_STEP, cone_exits
from .finite_rate import NumericalBlowup, SdeConfig, simulate_Y, simulate_Z
from .generator import apply_G, duality_test_function, generator_on_F
from .harmonic import q_sample
from .infinite_rate import ImubParams, TrotterConfig, path_sample, trotter_path
from .kernels import BoundaryPoint
from .paths import PathSample, _open_out
from .rng import stream
from .verify import (FAIL, KS_BROWNIAN, KS_EXACT, KS_TROTTER, PASS, convergence_sweep, ks_against_q,
                     martingale_residual, sweep_nonincreasing)

SAMPLE_CSV_VERSION = 1
SUITES = ("duality", "martingale", "sweep", "q-ks", "exit-ks")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument types


def pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(s) for s in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from None
    if a < 0 or b < 0:
        raise argparse.ArgumentTypeError("coordinates must be nonnegative")
    return a, b


def boundary(text: str) -> BoundaryPoint:
    try:
        return BoundaryPoint.parse(str(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def times_list(text: str) -> list[float]:
    try:
        return [float(s) for s in str(text).split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated times, got {text!r}") from None


def _point_any(text: str) -> tuple[float, float]:
    text = str(text)
    return boundary(text).coords if ":" in text or text == "origin" else pair(text)


# ---------------------------------------------------------------------------
# output


def write_samples_csv(path: str | Path, xs: np.ndarray, extra: dict[str, np.ndarray] | None = None) -> None:
    """E-valued samples as ``branch,magnitude`` (plus any extra columns)."""
    extra = extra or {}
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branch", "magnitude", *extra])
        for i, (a, b) in enumerate(xs):
            p = BoundaryPoint.from_coords(float(a), float(b))
            w.writerow([p.branch.value, repr(p.magnitude), *(repr(float(col[i])) for col in extra.values())])


def _config_echo(args: argparse.Namespace) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "config"):
            continue
        if isinstance(v, BoundaryPoint):
            v = str(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def emit(args, reports, extra: dict | None = None) -> int:
    js = [r.to_json() for r in reports]
    fails = sum(r["verdict"] == FAIL for r in js)
    passes = sum(r["verdict"] == PASS for r in js)
    doc = {"config": _config_echo(args), "reports": js, **(extra or {}), "summary": {"pass": passes, "fail": fails}}
    text = json.dumps(doc, indent=2, allow_nan=True) + "\n"
    if getattr(args, "json", None):
        Path(args.json).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 1 if fails else 0


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample_q(args) -> int:
    if args.u is None or args.v is None:
        raise UsageError("sample-q needs --u and --v")
    xs = q_sample(args.u, args.v, stream(args.seed), size=args.n)
    write_samples_csv(args.out or sys.stdout, xs)
    return 0


def cmd_exit_sim(args) -> int:
    if args.fig1:
        path_csv, trace_csv, _ = checks.write_fig1(Path(args.fig1), args.seed)
        print(f"wrote {path_csv} and {trace_csv}", file=sys.stderr)
    if args.n:
        ex = cone_exits(args.x, args.n, args.seed, step=args.step, workers=args.workers)
        write_samples_csv(args.out or sys.stdout, ex[:, :2], {"exit_time": ex[:, 2]})
    return 0


def _write_path(sample: PathSample, out) -> None:
    sample.write_csv(out or sys.stdout)


def cmd_sde(args) -> int:
    if args.process == "Z":
        sample = simulate_Z(args.gamma, args.y0, args.step, args.seed, args.times, n=args.n, workers=args.workers)
    else:
        cfg = SdeConfig(args.gamma, args.c, args.theta, args.step, args.seed)
        sample = simulate_Y(cfg, args.y0, args.times, n=args.n, scheme=args.scheme, workers=args.workers)
    _write_path(sample, args.out)
    return 0


def cmd_path(args) -> int:
    sample = path_sample(ImubParams(args.c, args.theta), _point_any(args.x0), args.times, stream(args.seed), n=args.n)
    _write_path(sample, args.out)
    return 0


def cmd_trotter(args) -> int:
    horizon = args.horizon if args.horizon is not None else max(args.times)
    cfg = TrotterConfig(args.eps, horizon, args.seed)
    sample = trotter_path(ImubParams(args.c, args.theta), _point_any(args.x0), cfg, args.times, n=args.n)
    _write_path(sample, args.out)
    return 0


def cmd_generator(args) -> int:
    params = ImubParams(args.c, args.theta)
    t0 = time.perf_counter()
    closed = generator_on_F(params, args.z, args.x)
    res = apply_G(params, duality_test_function(args.z), args.x, args.tol)
    err = abs(res.value - closed) / abs(closed) if closed != 0 else abs(res.value)
    rep = checks.value_report("generator_consistency", err, args.rel_tol, err <= args.rel_tol,
                              {"closed_form": closed, "quadrature": res.value,
                               "quadrature_error_estimate": res.quadrature_error_estimate})
    rep.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return emit(args, [rep])


def cmd_verify(args) -> int:
    if args.suite is None:
        raise UsageError(f"verify needs --suite (one of {', '.join(SUITES)})")
    params = ImubParams(args.c, args.theta)
    extra = {}
    if args.suite == "duality":
        reports = [checks.duality_report(params, args.x, args.z, args.t, args.n, args.seed, args.workers)]
    elif args.suite == "martingale":
        reports = [martingale_residual(params, args.x, args.z, args.t, args.eps, args.n, args.seed,
                                       scheme=args.scheme, workers=args.workers)]
    elif args.suite == "sweep":
        reports = convergence_sweep(params, args.x, args.t, args.gammas, args.n, args.seed,
                                    threshold=args.threshold if args.threshold is not None else KS_TROTTER,
                                    workers=args.workers)
        extra["nonincreasing"] = sweep_nonincreasing(reports)
        for r in reports[:-1]:
            r.verdict = "info"
        if not extra["nonincreasing"] and reports:
            reports[-1].verdict = FAIL
    elif args.suite == "q-ks":
        xs = q_sample(args.u, args.v, stream(args.seed), size=args.n)
        reports = [ks_against_q(xs, args.u, args.v, args.threshold or KS_EXACT, "q_sample_ks", {}, args.seed)]
    else:  # exit-ks
        ex = cone_exits((args.u, args.v), args.n, args.seed, step=args.step, workers=args.workers)
        reports = [ks_against_q(ex[:, :2], args.u, args.v, args.threshold or KS_BROWNIAN, "cone_exit_ks",
                                {"step": args.step}, args.seed)]
    return emit(args, reports, extra)


def cmd_all_checks(args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else None
    only = set(args.only) if args.only else None
    reports, criteria = checks.all_checks(args.seed, args.workers, out_dir, only)
    code = emit(args, reports, {"criteria": criteria})
    for c in criteria:
        print(f"criterion {c['criterion']:2d} {c['name']:28s} {c['verdict']:4s} "
              f"{c['wall_time_ms'] / 1e3:8.1f}s", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="imub", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, json_out=False):
        p.add_argument("--config", help="JSON file with defaults for the flags of this subcommand")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=None, help="worker processes (affects wall time only)")
        if json_out:
            p.add_argument("--json", help="write the JSON report here instead of stdout")

    def process_params(p):
        p.add_argument("--c", type=float, default=1.0)
        p.add_argument("--theta", type=pair, default=(1.0, 1.0))

    p = sub.add_parser("sample-q", help="draw from the harmonic measure Q_(u,v)")
    common(p)
    p.add_argument("--u", type=float, default=None)
    p.add_argument("--v", type=float, default=None)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample_q)

    p = sub.add_parser("exit-sim", help="cone exits of a discretized planar Brownian motion")
    common(p)
    p.add_argument("--x", type=pair, default=(1.0, 1.0), help="cone parameter")
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--out")
    p.add_argument("--fig1", metavar="DIR", help="write the strong-construction path and Brownian trace CSVs")
    p.set_defaults(func=cmd_exit_sim)

    p = sub.add_parser("sde", help="finite-rate SDE paths")
    common(p)
    process_params(p)
    p.add_argument("--process", choices=("Y", "Z"), default="Y")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--y0", type=pair, default=(1.0, 1.0))
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--scheme", choices=("euler", "split"), default="euler")
    p.add_argument("--times", type=times_list, default=[0.0, 1.0])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sde)

    p = sub.add_parser("path", help="infinite-rate paths from the exact transition kernel")
    common(p)
    process_params(p)
    p.add_argument("--x0", default="axis1:1")
    p.add_argument("--times", type=times_list, default=[0.0, 1.0])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("trotter", help="Trotter-scheme paths")
    common(p)
    process_params(p)
    p.add_argument("--x0", default="axis1:1")
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--times", type=times_list, default=[0.0, 1.0])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trotter)

    p = sub.add_parser("generator", help="generator on F(., z): quadrature against the closed form")
    common(p, json_out=True)
    process_params(p)
    p.add_argument("--z", type=boundary, default=BoundaryPoint.axis1(1.0))
    p.add_argument("--x", type=boundary, default=BoundaryPoint.axis1(2.0))
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_generator)

    p = sub.add_parser("verify", help="run one verification suite")
    common(p, json_out=True)
    process_params(p)
    p.add_argument("--suite", choices=SUITES, default=None)
    p.add_argument("--x", type=boundary, default=BoundaryPoint.axis1(1.0), help="start point on E")
    p.add_argument("--z", type=boundary, default=BoundaryPoint.axis1(1.0))
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--scheme", choices=("exact", "trapezoid"), default="exact")
    p.add_argument("--gammas", type=times_list, default=[1.0, 10.0, 100.0, 1000.0])
    p.add_argument("--u", type=float, default=1.0)
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("all-checks", help="run the acceptance suite")
    common(p, json_out=True)
    p.add_argument("--out-dir", help="directory for CSV artifacts (figure data)")
    p.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")], default=None,
                   help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_all_checks)
    return top


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    subparser = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    known = {a.dest: a for a in subparser._actions}  # noqa: SLF001
    defaults = {}
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("help", "config"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = known[dest]
        if action.type is not None and isinstance(value, (str, int, float)):
            value = action.type(str(value) if action.type in (pair, boundary, times_list) else value)
        elif isinstance(value, list) and action.type in (pair, times_list):
            value = action.type(",".join(map(str, value)))
        defaults[dest] = value
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:  # argparse usage errors
        return 2 if exc.code not in (0, None) else 0
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"imub: error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (UsageError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"imub: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalBlowup, ArithmeticError, RuntimeError) as exc:
        print(f"imub: numerical failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

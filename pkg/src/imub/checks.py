"""The acceptance suite: one function per criterion, each returning its reports.

Every criterion draws from its own seed, derived from the master seed and the
criterion number, so criteria can run alone or together with identical
results.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .brownian import BrownianPath, DriftSchedule, cone_exits, strong_construct, strong_marginals
from .generator import (apply_G, duality_test_function, generator_on_F, observed_order,
                        semigroup_derivative)
from .harmonic import (integrate_halfline, nu_integrate, q_branch_mass, q_density_axis, q_integrate,
                       q_moment, q_moment_bound, q_sample)
from .infinite_rate import ImubParams, drift_flow, path_sample, transition_marginal, trotter_marginal, trotter_run
from .kernels import BoundaryPoint, kernel_F, kernel_F_arr
from .rng import map_chunks, stream
from .verify import (FAIL, KS_BROWNIAN, KS_EXACT, KS_TROTTER, PASS, EstimateReport, convergence_sweep, ks_against_q,
                     martingale_residual, mc_estimate, sweep_nonincreasing, value_report)

KS_Q_CRIT_01 = 0.0052  # 1.63 / sqrt(1e5)
EXIT_TIME_BOUND = 2 * math.sqrt(2 / math.pi)  # E[tau^(1/2)] bound at (1, 1)
FIG1_PARAMS = {"c": 0.5, "theta": (2.0, 1.0), "x0": "axis2:1", "t_max": 3.0, "dt": 0.01, "step": 1e-4}
FIG1_TRACE_ROWS = 200_000


def sub_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(1000 + k,)).generate_state(1)[0])


@dataclass
class Context:
    seed: int
    workers: int | None = None
    out_dir: Path | None = None


# ---------------------------------------------------------------------------
# criteria


def c01_harmonic_exactness(ctx: Context):
    s = sub_seed(ctx.seed, 1)
    x = q_sample(1.0, 1.0, stream(s), size=100_000)
    return [ks_against_q(x, 1.0, 1.0, KS_Q_CRIT_01, "q_sample_ks", {}, s)]


def c02_normalization(ctx: Context):
    grid = [(u, v) for u in (0.1, 0.5, 1.0, 2.0, 3.0) for v in (0.2, 1.0, 1.5, 3.0)]
    worst = max(abs(q_integrate(lambda a, b: 1.0, u, v, complex_valued=False)[0] - 1.0) for u, v in grid)
    mass_quad, _ = integrate_halfline(lambda m: q_density_axis(1.0, 2.0, m, 1), points=[0.5, 1.0, 3.0])
    mass = q_branch_mass(1.0, 2.0)[0]
    return [
        value_report("normalization_max_error", worst, 1e-8, worst <= 1e-8, {"grid_points": len(grid)}),
        value_report("branch_mass_vs_quadrature", abs(mass - mass_quad), 1e-6, abs(mass - mass_quad) <= 1e-6,
                     {"u": 1.0, "v": 2.0, "closed_form": mass, "quadrature": mass_quad}),
        value_report("branch_mass_vs_table", abs(mass - 0.295167), 1e-6, abs(mass - 0.295167) <= 1e-6,
                     {"u": 1.0, "v": 2.0}),
    ]


def c03_scaling_composition(ctx: Context):
    s = sub_seed(ctx.seed, 3)
    reps = []
    for k, r in enumerate((0.5, 2.0)):
        x = r * q_sample(1.0, 1.0, stream(s, k), size=100_000)
        reps.append(ks_against_q(x, r, r, KS_EXACT, "scaling_pushforward", {"r": r}, s))
    rng = stream(s, 2)
    z = q_sample(1.0, 1.0, rng, size=100_000)
    y = q_sample(0.5 * z[:, 0] + 1.0, 0.5 * z[:, 1], rng)
    reps.append(ks_against_q(y, 1.5, 0.5, KS_EXACT, "composition", {"x": [1, 1], "r": 0.5, "y": [1, 0]}, s))
    return reps


def c04_moments(ctx: Context):
    grid = [(u, v) for u in (0.3, 1.0, 2.5) for v in (0.5, 1.0, 2.0)]
    mean_err = max(abs(q_moment(u, v, i, 1.0) - (u, v)[i - 1]) for u, v in grid for i in (1, 2))
    slack = min(q_moment_bound(u, v, p) - q_moment(u, v, i, p)
                for u, v in grid for i in (1, 2) for p in (1.0, 1.25, 1.5, 1.75, 1.9))
    return [
        value_report("mean_identity_max_error", mean_err, 1e-7, mean_err <= 1e-7, {"grid_points": len(grid)}),
        value_report("moment_bound_min_slack", slack, 0.0, slack >= 0.0, {"p": [1.0, 1.25, 1.5, 1.75, 1.9]}),
    ]


def write_fig1(out_dir: Path, seed: int) -> tuple[Path, Path, int]:
    """Strong-construction path with ``c = 1/2``, ``theta = (2, 1)`` from ``axis2:1`` plus its Brownian trace."""
    p = FIG1_PARAMS
    times = np.round(np.arange(0.0, p["t_max"] + p["dt"] / 2, p["dt"]), 10)
    path = BrownianPath(step=p["step"], seed=seed, trace=FIG1_TRACE_ROWS)
    sample = strong_construct(path, BoundaryPoint.parse(p["x0"]), DriftSchedule.from_rates(p["c"], p["theta"]),
                              times)
    out_dir.mkdir(parents=True, exist_ok=True)
    path_csv = out_dir / "fig1_path.csv"
    trace_csv = out_dir / "fig1_trace.csv"
    sample.write_csv(path_csv)
    with open(trace_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write("s,b1,b2\n")
        for s_, b1, b2 in path.trace:
            fh.write(f"{float(s_)!r},{float(b1)!r},{float(b2)!r}\n")
    return path_csv, trace_csv, len(times)


def c05_strong_construction(ctx: Context):
    s = sub_seed(ctx.seed, 5)
    ex = cone_exits((1.0, 1.0), 100_000, s, step=1e-4, workers=ctx.workers)
    reps = [ks_against_q(ex[:, :2], 1.0, 1.0, KS_BROWNIAN, "cone_exit_ks", {"step": 1e-4}, s)]
    root = np.sqrt(ex[:, 2])
    mean, se = float(root.mean()), float(root.std(ddof=1) / math.sqrt(root.size))
    reps.append(EstimateReport(mean, root.size, (se, 0.0), EXIT_TIME_BOUND,
                               PASS if mean <= EXIT_TIME_BOUND + 3 * se else FAIL, 3.0, "exit_time_sqrt_moment",
                               {"x": [1, 1], "p": 1, "bound": EXIT_TIME_BOUND}, s))
    params = ImubParams(FIG1_PARAMS["c"], FIG1_PARAMS["theta"])
    x0 = BoundaryPoint.parse(FIG1_PARAMS["x0"])
    xt = strong_marginals(x0, DriftSchedule.from_rates(params.c, params.theta), [1.0], 100_000, s + 1,
                          workers=ctx.workers)[:, -1]
    u, v = drift_flow(params, x0, 1.0)
    reps.append(ks_against_q(xt, float(u), float(v), KS_BROWNIAN, "strong_marginal_ks",
                             {"c": params.c, "theta": params.theta, "x0": str(x0), "t": 1.0}, s + 1))
    if ctx.out_dir is not None:
        path_csv, _, rows = write_fig1(ctx.out_dir, s + 2)
        ok = path_csv.exists() and sum(1 for _ in open(path_csv)) == rows + 1
        reps.append(value_report("fig1_csv", rows, rows, ok, {**FIG1_PARAMS, "file": path_csv.name}, s + 2))
    return reps


def c06_semigroup(ctx: Context):
    s = sub_seed(ctx.seed, 6)
    params = ImubParams(1.0, (1.0, 1.0))
    x0 = BoundaryPoint.axis1(1.0)
    two = path_sample(params, x0, [0.0, 0.3, 1.0], stream(s), n=100_000).states[:, -1]
    u, v = drift_flow(params, x0, 1.0)
    return [ks_against_q(two, float(u), float(v), KS_EXACT, "chapman_kolmogorov",
                         {"c": 1.0, "theta": [1, 1], "x0": str(x0), "s": 0.3, "t": 0.7}, s)]


def duality_report(params: ImubParams, x: BoundaryPoint, z: BoundaryPoint, t: float, n: int, seed: int,
                   workers: int | None = None) -> EstimateReport:
    """``E_x[F(X_t, z)]`` by exact transitions against ``F(x, e^{-ct} z) F(theta, (1 - e^{-ct}) z)``."""
    t0 = time.perf_counter()
    y = transition_marginal(params, x, t, n, seed, workers)
    decay = math.exp(-params.c * t)
    zc = np.array(z.coords)
    ref = kernel_F(x.coords, tuple(decay * zc)) * kernel_F(params.theta, tuple((1 - decay) * zc))
    rep = mc_estimate(kernel_F_arr(y, zc), n, ref, 4.0, "duality",
                      {"c": params.c, "theta": params.theta, "x": str(x), "z": str(z), "t": t}, seed)
    rep.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return rep


def c07_duality(ctx: Context):
    s = sub_seed(ctx.seed, 7)
    return [duality_report(ImubParams(1.0, (1.0, 1.0)), BoundaryPoint.axis2(1.0), BoundaryPoint.axis1(1.0),
                           math.log(2.0), 100_000, s, ctx.workers)]


def c08_trotter(ctx: Context):
    s = sub_seed(ctx.seed, 8)
    params = ImubParams(1.0, (1.0, 1.0))
    x0 = BoundaryPoint.axis1(1.0)
    u, v = (float(a) for a in drift_flow(params, x0, 1.0))
    reps = []
    for eps, thr in ((0.5, KS_EXACT), (1e-3, KS_TROTTER)):
        x = trotter_marginal(params, x0, eps, 1.0, 100_000, s, ctx.workers)
        reps.append(ks_against_q(x, u, v, thr, "trotter_marginal", {"epsilon": eps, "t": 1.0, "x0": str(x0)}, s))
    return reps


def moment_domination(samples: np.ndarray, exact: tuple[float, float], sigmas: float = 3.0,
                      params: dict | None = None, seed: int | None = None) -> list[EstimateReport]:
    """Coordinate means of ``samples`` at most ``exact`` plus ``sigmas`` standard errors."""
    reps = []
    for i in (0, 1):
        col = samples[:, i]
        mean, se = float(col.mean()), float(col.std(ddof=1) / math.sqrt(col.size))
        reps.append(EstimateReport(mean, col.size, (se, 0.0), exact[i],
                                   PASS if mean <= exact[i] + sigmas * se else FAIL, sigmas,
                                   "moment_domination", {**(params or {}), "coordinate": i + 1, "p": 1}, seed))
    return reps


def c09_gamma_sweep(ctx: Context, n: int = 50_000):
    s = sub_seed(ctx.seed, 9)
    params = ImubParams(1.0, (1.0, 1.0))
    x0 = BoundaryPoint.axis1(1.0)
    reports, samples = convergence_sweep(params, x0, 1.0, [1, 10, 100, 1000], n, s, workers=ctx.workers,
                                         return_samples=True)
    for r in reports[:-1]:
        r.verdict = "info"  # only the trend and the final value are criteria
    trend = sweep_nonincreasing(reports)
    reps = list(reports)
    reps.append(value_report("gamma_sweep_nonincreasing", reports[-1].statistic, 0.0, trend,
                             {"statistics": [r.statistic for r in reports]}, s))
    u, v = (float(a) for a in drift_flow(params, x0, 1.0))
    # p = 1 moments of X_t: Q preserves means
    exact = (q_moment(u, v, 1, 1.0), q_moment(u, v, 2, 1.0))
    for g, y in zip([1, 10, 100, 1000], samples):
        reps.extend(moment_domination(y, exact, 3.0, {"gamma": g}, s))
    return reps


GENERATOR_Z = ("origin", "axis1:1", "axis1:0.5", "axis2:1", "axis2:2", "axis1:3")
GENERATOR_X = ("origin", "axis1:0.5", "axis1:1", "axis1:2", "axis1:4", "axis2:0.5", "axis2:1", "axis2:3")


def generator_grid_error(params: ImubParams) -> float:
    worst = 0.0
    for zs in GENERATOR_Z:
        z = BoundaryPoint.parse(zs)
        f = duality_test_function(z)
        for xs in GENERATOR_X:
            x = BoundaryPoint.parse(xs)
            exact = generator_on_F(params, z, x)
            # tolerance relative to the size of F on the scale of x
            tol = 1e-11 * max(abs(kernel_F(x.coords, z.coords)), 1e-300)
            got = apply_G(params, f, x, tol).value
            err = abs(got - exact) / abs(exact) if exact != 0 else abs(got)
            worst = max(worst, err)
    return worst


def c10_generator(ctx: Context):
    params = ImubParams(1.0, (1.0, 1.0))
    worst = generator_grid_error(params)
    y2, _ = nu_integrate(lambda a, b: b, 0.0, 0.0)
    eps = 0.5
    arctan_q, _ = integrate_halfline(
        lambda r: 4 / math.pi * r * (r - 1) / (4 * eps ** 2 + (r * r + eps ** 2 - 1) ** 2), 1e-11, points=[1.0])
    arctan_ref = 2 / math.pi / eps * math.atan(eps)
    return [
        value_report("generator_grid_rel_error", worst, 1e-6, worst <= 1e-6,
                     {"z": list(GENERATOR_Z), "x": list(GENERATOR_X), "c": 1.0, "theta": [1, 1]}),
        value_report("nu_y2_integral_error", abs(y2 - 1.0), 1e-8, abs(y2 - 1.0) <= 1e-8),
        value_report("arctan_identity_error", abs(arctan_q - arctan_ref), 1e-8, abs(arctan_q - arctan_ref) <= 1e-8,
                     {"eps": eps, "reference": arctan_ref}),
    ]


SEMIGROUP_CASES = (("axis1:1", "axis1:2"), ("axis1:0.5", "axis2:1"), ("axis2:1", "axis1:0.5"))
SEMIGROUP_EPS = (1e-1, 1e-2, 1e-3, 1e-4)


def c11_semigroup_derivative(ctx: Context):
    params = ImubParams(1.0, (1.0, 1.0))
    reps = []
    for zs, xs in SEMIGROUP_CASES:
        z, x = BoundaryPoint.parse(zs), BoundaryPoint.parse(xs)
        f = duality_test_function(z)
        limit = apply_G(params, f, x, 1e-12).value
        vals = semigroup_derivative(params, f, x, SEMIGROUP_EPS)
        order = observed_order(SEMIGROUP_EPS, vals, limit)
        reps.append(value_report("semigroup_derivative_order", order, 1.0, abs(order - 1.0) <= 0.1,
                                 {"z": zs, "x": xs, "eps": list(SEMIGROUP_EPS),
                                  "last_error": abs(vals[-1] - limit)}))
    return reps


def c12_martingale(ctx: Context):
    s = sub_seed(ctx.seed, 12)
    return [martingale_residual(ImubParams(1.0, (1.0, 1.0)), BoundaryPoint.axis1(1.0), BoundaryPoint.axis1(1.0),
                                1.0, 1e-3, 100_000, s, workers=ctx.workers)]


def _origin_hits_chunk(params, x0, eps, steps, rng, size):
    hits = np.zeros(1, dtype=np.int64)

    def on_step(k, pre, post):
        hits[0] += int(np.count_nonzero((post[:, 0] == 0) & (post[:, 1] == 0)))

    trotter_run(params, x0, eps, steps, rng, size, on_step)
    return hits


def c13_polarity(ctx: Context, paths: int = 10_000, steps: int = 100):
    s = sub_seed(ctx.seed, 13)
    params = ImubParams(1.0, (1.0, 1.0))
    fn = lambda rng, size: _origin_hits_chunk(params, (1.0, 0.0), 0.01, steps, rng, size)  # noqa: E731
    hits = int(map_chunks(fn, paths, s, key=(8,), workers=1).sum())
    return [value_report("origin_hits", hits, 0, hits == 0,
                         {"c": 1.0, "theta": [1, 1], "x0": "axis1:1", "epsilon": 0.01, "grid_states": paths * steps},
                         s)]


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    time_limit_s: float | None
    run: Callable[[Context], list]


CRITERIA = (
    Criterion(1, "harmonic_measure_exactness", 5, c01_harmonic_exactness),
    Criterion(2, "normalization_branch_mass", 10, c02_normalization),
    Criterion(3, "scaling_composition", 30, c03_scaling_composition),
    Criterion(4, "mean_moment_identities", 10, c04_moments),
    Criterion(5, "strong_construction", 300, c05_strong_construction),
    Criterion(6, "semigroup_law", 30, c06_semigroup),
    Criterion(7, "duality", 30, c07_duality),
    Criterion(8, "trotter_scheme", 120, c08_trotter),
    Criterion(9, "gamma_convergence", 600, c09_gamma_sweep),
    Criterion(10, "generator_consistency", 60, c10_generator),
    Criterion(11, "semigroup_derivative", 60, c11_semigroup_derivative),
    Criterion(12, "martingale_problem", 120, c12_martingale),
    Criterion(13, "polarity", 120, c13_polarity),
)


def run_criterion(crit: Criterion, ctx: Context) -> tuple[list, dict]:
    t0 = time.perf_counter()
    try:
        reports = crit.run(ctx)
    except Exception as exc:  # numerical failures are reported per check
        reports = [value_report(f"{crit.name}_error", math.nan, math.nan, False, {"error": repr(exc)})]
    wall = (time.perf_counter() - t0) * 1e3
    for r in reports:
        r.params = {"criterion": crit.number, **r.params}
    verdict = PASS if all(r.verdict in (PASS, "info") for r in reports) else FAIL
    return reports, {"criterion": crit.number, "name": crit.name, "verdict": verdict,
                     "time_limit_s": crit.time_limit_s, "wall_time_ms": wall}


def all_checks(seed: int, workers: int | None = None, out_dir: Path | None = None,
               only: set[int] | None = None) -> tuple[list, list]:
    ctx = Context(seed, workers, out_dir)
    reports, criteria = [], []
    for crit in CRITERIA:
        if only is not None and crit.number not in only:
            continue
        reps, summary = run_criterion(crit, ctx)
        reports.extend(reps)
        criteria.append(summary)
    return reports, criteria

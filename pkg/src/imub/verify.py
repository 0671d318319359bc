"""Monte Carlo estimates, KS tests and the martingale residual as pass/fail reports."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .finite_rate import SdeConfig, simulate_Y
from .harmonic import DegenerateStart, signed_cdf
from .infinite_rate import ImubParams, as_coords, drift_flow, trotter_run
from .kernels import BoundaryPoint, kernel_F, kernel_F_arr, lozenge_arr
from .rng import map_chunks

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
# default KS thresholds by which side carries bias
KS_EXACT = 0.01
KS_BROWNIAN = 0.015
KS_TROTTER = 0.02
ATOM_RTOL = 1e-9
KS_CRIT_95 = 1.358  # asymptotic one-sample KS critical value at alpha = 0.05, times sqrt(n)


class InsufficientSamples(ValueError):
    pass


def _jsonable(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, BoundaryPoint):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


@dataclass
class EstimateReport:
    estimate: complex | float
    n: int
    std_error: tuple[float, float]
    reference: complex | float | None
    verdict: str
    band_width_sigmas: float = 4.0
    check: str = "estimate"
    params: dict = field(default_factory=dict)
    seed: int | None = None
    wall_time_ms: float = 0.0

    def to_json(self) -> dict:
        est = complex(self.estimate)
        return {
            "check": self.check, "params": _jsonable(self.params), "n": self.n,
            "estimate": {"re": est.real, "im": est.imag},
            "std_error": {"re": self.std_error[0], "im": self.std_error[1]},
            "reference": None if self.reference is None else _jsonable(complex(self.reference)),
            "statistic": None, "threshold": self.band_width_sigmas,
            "verdict": self.verdict, "seed": self.seed, "wall_time_ms": self.wall_time_ms,
        }


@dataclass
class KsReport:
    statistic: float
    n: int
    threshold: float
    verdict: str
    check: str = "ks"
    params: dict = field(default_factory=dict)
    seed: int | None = None
    wall_time_ms: float = 0.0

    def to_json(self) -> dict:
        return {
            "check": self.check, "params": _jsonable(self.params), "n": self.n,
            "estimate": None, "std_error": None, "reference": None,
            "statistic": self.statistic, "threshold": self.threshold,
            "verdict": self.verdict, "seed": self.seed, "wall_time_ms": self.wall_time_ms,
        }


def value_report(check: str, value: float, threshold: float, ok: bool, params: dict | None = None,
                 seed: int | None = None) -> KsReport:
    """A deterministic check (quadrature error, order estimate, count) in the KS report shape."""
    return KsReport(float(value), 0, float(threshold), PASS if ok else FAIL, check, params or {}, seed)


# ---------------------------------------------------------------------------
# Monte Carlo means


def mc_estimate(sampler: Callable[[int], np.ndarray] | np.ndarray, n: int | None = None, reference=None,
                sigmas: float = 4.0, check: str = "estimate", params: dict | None = None,
                seed: int | None = None) -> EstimateReport:
    """Mean and componentwise standard error of ``n`` values.

    ``sampler`` is either an array of values or a callable returning ``n``
    values.  Complex estimates pass only if both components are inside the
    band.
    """
    t0 = time.perf_counter()
    values = np.asarray(sampler(n) if callable(sampler) else sampler)
    n = values.shape[0] if n is None else n
    if n < 100 or values.shape[0] < 100:
        raise InsufficientSamples(f"need at least 100 samples, got {values.shape[0]}")
    values = values[:n]
    mean = complex(np.mean(values))
    if np.all(values == values[0]):
        # exact for constants: summation roundoff would otherwise fail a zero-width band
        mean, se = complex(values[0]), (0.0, 0.0)
    else:
        se = (float(np.std(values.real, ddof=1) / math.sqrt(n)),
              float(np.std(np.imag(values), ddof=1) / math.sqrt(n)))
    if reference is None:
        verdict = INCONCLUSIVE
    else:
        ref = complex(reference)
        ok = abs(mean.real - ref.real) <= sigmas * se[0] and abs(mean.imag - ref.imag) <= sigmas * se[1]
        verdict = PASS if ok else FAIL
    est = mean if np.iscomplexobj(values) else mean.real
    return EstimateReport(est, n, se, reference, verdict, sigmas, check, params or {}, seed,
                          (time.perf_counter() - t0) * 1e3)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def signed_line(samples) -> np.ndarray:
    """``w = x1 - x2``: Axis1 to the positive, Axis2 to the negative half-line."""
    if isinstance(samples, np.ndarray):
        arr = samples
    else:
        arr = np.array([p.coords if isinstance(p, BoundaryPoint) else p for p in samples], dtype=float)
    return arr[..., 0] - arr[..., 1]


def ks_statistic(w: np.ndarray, u: float, v: float) -> float:
    """One-sample KS distance of ``w`` from the signed-line law of Q_(u,v).

    Starts on E give an atom at ``u - v``, for which the distance is computed
    directly from the empirical CDF on both sides of the atom.  Samples within
    ``ATOM_RTOL`` of the atom count as sitting on it, so a discretized drift
    flow that lands there up to roundoff is not penalized.
    """
    w = np.asarray(w, dtype=float)
    if u > 0 and v > 0:
        return float(stats.kstest(w, partial(signed_cdf, u=u, v=v)).statistic)
    a = u - v
    tol = ATOM_RTOL * max(1.0, abs(a))
    below = np.mean(w < a - tol)
    at_or_below = np.mean(w <= a + tol)
    return float(max(below, 1.0 - at_or_below))


def ks_against_q(samples, u: float, v: float, threshold: float = KS_EXACT, check: str = "ks_against_q",
                 params: dict | None = None, seed: int | None = None) -> KsReport:
    if u <= 0 or v <= 0:
        raise DegenerateStart("KS against Q needs an interior start")
    t0 = time.perf_counter()
    w = signed_line(samples)
    stat = ks_statistic(w, u, v)
    return KsReport(stat, int(w.shape[0]), threshold, PASS if stat <= threshold else FAIL, check,
                    {"u": u, "v": v, **(params or {})}, seed, (time.perf_counter() - t0) * 1e3)


def noise_floor(n: int) -> float:
    return KS_CRIT_95 / math.sqrt(n)


# ---------------------------------------------------------------------------
# martingale problem


def _segment_integral_trapezoid(params, z, post, eps, substeps):
    """``int_0^eps (c(theta - phi_s) <> z) F(phi_s, z) ds`` along the drift flow from ``post``."""
    s = np.linspace(0.0, eps, substeps + 1)
    theta = np.asarray(params.theta)
    decay = np.exp(-params.c * s)[:, None, None]
    phi = decay * post[None] + (1 - decay) * theta
    g = lozenge_arr(params.c * (theta - phi), np.asarray(z)) * kernel_F_arr(phi, np.asarray(z))
    return np.trapezoid(g, s, axis=0) if hasattr(np, "trapezoid") else np.trapz(g, s, axis=0)


def _martingale_chunk(params, x0, z, t, eps, scheme, substeps, rng, size):
    k_total = int(round(t / eps))
    zc = np.asarray(z)
    x0c = np.asarray(x0)
    m = np.full(size, kernel_F(x0c, zc), dtype=complex)
    if k_total == 0:
        return m
    acc = {"post": np.broadcast_to(x0c, (size, 2)).astype(float), "m": m}

    def on_step(k, pre, post):
        if scheme == "exact":
            # between jumps the integrand is the time derivative of F along the drift flow
            acc["m"] += kernel_F_arr(post, zc) - kernel_F_arr(pre, zc)
        else:
            integral = _segment_integral_trapezoid(params, zc, acc["post"], eps, substeps)
            acc["m"] += kernel_F_arr(post, zc) - kernel_F_arr(acc["post"], zc) - integral
            acc["post"] = post

    trotter_run(params, x0c, eps, k_total, rng, size, on_step)
    return acc["m"]


def martingale_samples(params: ImubParams, x0: BoundaryPoint, z: BoundaryPoint, t: float, eps: float, n: int,
                       seed: int, scheme: str = "exact", substeps: int = 16,
                       workers: int | None = None) -> np.ndarray:
    """Samples of ``M_t = F(X_t, z) - int_0^t (c(theta - X_s) <> z) F(X_s, z) ds`` along Trotter paths.

    ``t`` must be a multiple of ``eps``.
    """
    if not 0 < eps <= t and t != 0:
        raise ValueError("need 0 < eps <= t")
    if t != 0 and abs(round(t / eps) * eps - t) > 1e-9 * t:
        raise ValueError("t must be a multiple of eps")
    if scheme not in ("exact", "trapezoid"):
        raise ValueError(f"unknown scheme {scheme!r}")
    fn = partial(_martingale_chunk, params, x0.coords, z.coords, t, eps, scheme, substeps)
    return map_chunks(fn, n, seed, key=(7,), workers=workers)


def martingale_residual(params: ImubParams, x0: BoundaryPoint, z: BoundaryPoint, t: float, eps: float, n: int,
                        seed: int = 0, scheme: str = "exact", substeps: int = 16, sigmas: float = 4.0,
                        workers: int | None = None) -> EstimateReport:
    t0 = time.perf_counter()
    m = martingale_samples(params, x0, z, t, eps, n, seed, scheme, substeps, workers)
    rep = mc_estimate(m, n, kernel_F(x0.coords, z.coords), sigmas, check="martingale_residual",
                      params={"c": params.c, "theta": params.theta, "x0": x0, "z": z, "t": t, "eps": eps,
                              "scheme": scheme}, seed=seed)
    rep.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return rep


# ---------------------------------------------------------------------------
# gamma -> infinity


def sweep_step(gamma: float, scheme: str) -> float:
    """Default step: ``1e-4 / gamma`` for Euler, outer step ``1e-2`` for the split scheme."""
    if scheme == "euler":
        return 1e-4 / max(gamma, 1.0)
    return 1e-2


def convergence_sweep(params: ImubParams, x0, t: float, gammas: Sequence[float], n: int, seed: int = 0,
                      scheme: str = "split", threshold: float = KS_TROTTER, workers: int | None = None,
                      return_samples: bool = False):
    """KS distance between ``Y^gamma_t`` (on the signed line) and the exact ``X_t`` for each gamma.

    The verdict of each entry is ``statistic <= threshold``; use
    :func:`sweep_nonincreasing` for the trend.
    """
    gammas = [float(g) for g in gammas]
    if any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gammas must be increasing")
    u, v = (float(a) for a in drift_flow(params, x0, t))
    reports, samples = [], []
    for g in gammas:
        t0 = time.perf_counter()
        step = sweep_step(g, scheme)
        cfg = SdeConfig(g, params.c, params.theta, step, seed)
        y = simulate_Y(cfg, tuple(as_coords(x0)), [t], n=n, scheme=scheme, workers=workers).states[:, -1]
        stat = ks_statistic(signed_line(y), u, v)
        reports.append(KsReport(stat, n, threshold, PASS if stat <= threshold else FAIL, "gamma_sweep",
                                {"gamma": g, "scheme": scheme, "step": step, "t": t, "c": params.c,
                                 "theta": params.theta, "x0": str(x0)}, seed, (time.perf_counter() - t0) * 1e3))
        samples.append(y)
    return (reports, samples) if return_samples else reports


def sweep_nonincreasing(reports: Sequence[KsReport]) -> bool:
    """Statistics nonincreasing up to twice the KS noise floor."""
    return all(b.statistic <= a.statistic + 2 * noise_floor(b.n) for a, b in zip(reports, reports[1:]))

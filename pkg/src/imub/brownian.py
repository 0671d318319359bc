"""Discretized planar Brownian motion, rectangular-cone exits and the strong construction.

A :class:`BrownianPath` starts at the origin and is advanced lazily.  For a
cone parameter ``x`` the exit ``D_x`` is the first position outside the
cone ``[-x, inf)`` shifted by ``x`` and projected onto E.

Far from the cone boundary the walker sums ``k`` consecutive increments into
one Gaussian draw (``k`` a power of two).  A block is only taken when the
boundary is at least ``BLOCK_SIGMAS`` block standard deviations away, so the
chance of skipping a crossing inside a block is below ``1e-14``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numba as nb
import numpy as np
from scipy import integrate

from .kernels import BoundaryPoint, QuadrantPoint
from .paths import PathSample
from .rng import map_chunks, stream

DEFAULT_STEP = 1e-4
DEFAULT_BUDGET = 10**12
BLOCK_SIGMAS = 8.0
MAX_BLOCK = 2**30


class StepBudgetExceeded(RuntimeError):
    pass


class ScheduleError(ValueError):
    pass


@nb.njit(cache=True)
def _walk(rng, b1, b2, t, x1, x2, h, budget, trace):
    """Advance from ``(b1, b2)`` at time ``t`` until ``b + x`` leaves the quadrant.

    Returns ``(b1, b2, t, steps, d1, d2, exited, prev1, prev2)``; ``d`` is the
    projected exit point and ``prev`` the last position inside the cone.
    ``trace`` is a preallocated ``(m, 3)`` buffer (``m`` may be 0); the walker
    fills rows ``1..`` with ``(t, b1, b2)`` until it is full.
    """
    steps = 0
    ntrace = trace.shape[0]
    row = 1
    if b1 + x1 < 0.0 or b2 + x2 < 0.0 or (b1 + x1 == 0.0) or (b2 + x2 == 0.0):
        return b1, b2, t, steps, max(b1 + x1, 0.0), max(b2 + x2, 0.0), True, b1, b2
    sqh = math.sqrt(h)
    while steps < budget:
        gap = min(b1 + x1, b2 + x2)
        k = 1
        while k < MAX_BLOCK and BLOCK_SIGMAS * sqh * math.sqrt(2.0 * k) <= gap and steps + 2 * k <= budget:
            k *= 2
        sd = sqh * math.sqrt(k)
        p1 = b1
        p2 = b2
        b1 += sd * rng.standard_normal()
        b2 += sd * rng.standard_normal()
        t += k * h
        steps += k
        if row < ntrace:
            trace[row, 0] = t
            trace[row, 1] = b1
            trace[row, 2] = b2
            row += 1
        o1 = b1 + x1 < 0.0
        o2 = b2 + x2 < 0.0
        if o1 or o2:
            if o1 and o2:
                # both coordinates crossed in one step: keep the earlier crossing
                l1 = (p1 + x1) / (p1 - b1)
                l2 = (p2 + x2) / (p2 - b2)
                if l1 <= l2:
                    return b1, b2, t, steps, 0.0, p2 + x2 + l1 * (b2 - p2), True, p1, p2
                return b1, b2, t, steps, p1 + x1 + l2 * (b1 - p1), 0.0, True, p1, p2
            if o1:
                return b1, b2, t, steps, 0.0, b2 + x2, True, p1, p2
            return b1, b2, t, steps, b1 + x1, 0.0, True, p1, p2
    return b1, b2, t, steps, 0.0, 0.0, False, b1, b2


_NO_TRACE = np.empty((0, 3))


@dataclass(frozen=True)
class ExitRecord:
    x: QuadrantPoint
    exit_point: BoundaryPoint
    exit_time: float


class BrownianPath:
    """Planar Brownian motion from the origin, discretized with time step ``step``."""

    def __init__(self, step: float = DEFAULT_STEP, seed: int = 0, budget: int = DEFAULT_BUDGET,
                 rng: np.random.Generator | None = None, trace: int = 0):
        if step <= 0:
            raise ValueError("step must be positive")
        self.step = float(step)
        self.seed = seed
        self.budget = int(budget)
        self.rng = stream(seed) if rng is None else rng
        self.position = (0.0, 0.0)
        self.time = 0.0
        self.steps = 0
        self._trace_cap = int(trace)
        self.trace: list[tuple[float, float, float]] = [(0.0, 0.0, 0.0)] if trace else []

    def exit(self, x) -> ExitRecord:
        x1, x2 = (x.x1, x.x2) if isinstance(x, QuadrantPoint) else (float(x[0]), float(x[1]))
        room = max(self._trace_cap - len(self.trace), 0)
        buf = np.zeros((room + 1, 3)) if room else _NO_TRACE
        b1, b2, t, steps, d1, d2, ok, _, _ = _walk(self.rng, self.position[0], self.position[1], self.time,
                                                  x1, x2, self.step, self.budget - self.steps, buf)
        self.steps += steps
        if room:
            rows = buf[1:]
            self.trace.extend(map(tuple, rows[rows[:, 0] > 0]))
        if not ok:
            raise StepBudgetExceeded(f"no exit from cone {x} within {self.budget} steps")
        self.position = (b1, b2)
        self.time = t
        return ExitRecord(QuadrantPoint(x1, x2), BoundaryPoint.from_coords(d1, d2), t)


def cone_exit(path: BrownianPath, x) -> ExitRecord:
    return path.exit(x)


def d_process(path: BrownianPath, xs: Sequence) -> list[ExitRecord]:
    """Exits of nested cones along one path; ``xs`` must be componentwise nondecreasing."""
    pts = [np.array([p.x1, p.x2]) if isinstance(p, QuadrantPoint) else np.asarray(p, dtype=float) for p in xs]
    for a, b in zip(pts, pts[1:]):
        if np.any(b < a):
            raise ValueError("cone parameters must be componentwise nondecreasing")
    return [path.exit(p) for p in pts]


# ---------------------------------------------------------------------------
# batched exits


@nb.njit(cache=True)
def _exit_batch(rng, n, x1, x2, h, budget):
    out = np.empty((n, 3))
    no_trace = _empty_trace()
    for i in range(n):
        _, _, t, steps, d1, d2, ok, _, _ = _walk(rng, 0.0, 0.0, 0.0, x1, x2, h, budget, no_trace)
        if not ok:
            out[i, 0] = np.nan
            out[i, 1] = np.nan
            out[i, 2] = np.nan
        else:
            out[i, 0] = d1
            out[i, 1] = d2
            out[i, 2] = t
    return out


@nb.njit(cache=True)
def _empty_trace():
    return np.empty((0, 3))


@nb.njit(cache=True)
def _nested_batch(rng, n, cones, h, budget):
    m = cones.shape[0]
    out = np.empty((n, m, 3))
    no_trace = _empty_trace()
    for i in range(n):
        b1 = 0.0
        b2 = 0.0
        t = 0.0
        used = 0
        for j in range(m):
            b1, b2, t, steps, d1, d2, ok, _, _ = _walk(rng, b1, b2, t, cones[j, 0], cones[j, 1], h,
                                                       budget - used, no_trace)
            used += steps
            if not ok:
                out[i, j, 0] = np.nan
                out[i, j, 1] = np.nan
                out[i, j, 2] = np.nan
            else:
                out[i, j, 0] = d1
                out[i, j, 1] = d2
                out[i, j, 2] = t
    return out


def _exit_chunk(x, step, budget, rng, size):
    return _exit_batch(rng, size, float(x[0]), float(x[1]), step, budget)


def _nested_chunk(cones, step, budget, rng, size):
    return _nested_batch(rng, size, np.asarray(cones, dtype=float), step, budget)


def cone_exits(x, n: int, seed: int, step: float = DEFAULT_STEP, budget: int = DEFAULT_BUDGET,
               workers: int | None = None) -> np.ndarray:
    """Exit points and times for ``n`` independent paths: array ``(n, 3)`` of ``(d1, d2, tau)``."""
    out = map_chunks(partial(_exit_chunk, tuple(map(float, x)), step, budget), n, seed, key=(2,), workers=workers)
    if np.isnan(out).any():
        raise StepBudgetExceeded(f"{int(np.isnan(out[:, 0]).sum())} paths did not exit within {budget} steps")
    return out


def nested_exits(cones, n: int, seed: int, step: float = DEFAULT_STEP, budget: int = DEFAULT_BUDGET,
                 workers: int | None = None) -> np.ndarray:
    """``d_process`` over ``n`` paths: array ``(n, len(cones), 3)``."""
    cones = np.asarray(cones, dtype=float)
    if np.any(np.diff(cones, axis=0) < 0):
        raise ValueError("cone parameters must be componentwise nondecreasing")
    out = map_chunks(partial(_nested_chunk, cones, step, budget), n, seed, key=(3,), workers=workers)
    if np.isnan(out).any():
        raise StepBudgetExceeded(f"paths did not exit within {budget} steps")
    return out


# ---------------------------------------------------------------------------
# strong construction


@dataclass(frozen=True)
class DriftSchedule:
    """Time-dependent killing rate ``cbar`` and immigration rate ``thetabar``.

    Constant schedules are marked so that the exponential integrals are
    evaluated in closed form.
    """

    cbar: Callable[[float], float]
    thetabar: Callable[[float], Sequence[float]]
    constant: tuple[float, tuple[float, float]] | None = None

    @classmethod
    def from_rates(cls, c: float, theta: Sequence[float]) -> "DriftSchedule":
        """Schedule of the process with parameters ``(c, theta)``: ``thetabar = c * theta``."""
        th = (float(theta[0]), float(theta[1]))
        rate = (c * th[0], c * th[1])
        return cls(lambda r: c, lambda r: rate, constant=(float(c), th))

    def decay(self, s: float, t: float) -> float:
        """``exp(-int_s^t cbar)``."""
        if self.constant is not None:
            return math.exp(-self.constant[0] * (t - s))
        val, _ = integrate.quad(self._cbar, s, t, limit=200)
        return math.exp(-val)

    def xi(self, s: float, t: float) -> np.ndarray:
        """``int_s^t thetabar(r) / decay(0, r) dr``."""
        if self.constant is not None:
            c, th = self.constant
            if c == 0:
                return np.zeros(2)
            return np.asarray(th) * (math.exp(c * t) - math.exp(c * s))
        out = []
        for i in (0, 1):
            val, _ = integrate.quad(lambda r: self._theta(r)[i] / self.decay(0.0, r), s, t, limit=200)
            out.append(val)
        return np.array(out)

    def _cbar(self, r):
        try:
            val = float(self.cbar(r))
        except Exception as exc:
            raise ScheduleError(f"cbar not evaluable at {r}") from exc
        if not math.isfinite(val) or val < 0:
            raise ScheduleError(f"cbar({r}) = {val} is not a nonnegative number")
        return val

    def _theta(self, r):
        try:
            val = tuple(float(v) for v in self.thetabar(r))
        except Exception as exc:
            raise ScheduleError(f"thetabar not evaluable at {r}") from exc
        if len(val) != 2 or not all(math.isfinite(v) and v >= 0 for v in val):
            raise ScheduleError(f"thetabar({r}) = {val} is not a point of the quadrant")
        return val

    def validate(self, t_max: float, samples: int = 33) -> None:
        for r in np.linspace(0.0, t_max, samples):
            self._cbar(r)
            self._theta(r)


def cone_schedule(x0, schedule: DriftSchedule, times) -> tuple[np.ndarray, np.ndarray]:
    """Cone parameters ``x0 + Xi(0, t)`` and scale factors ``C(0, t)`` at ``times``."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing from 0 or later")
    if schedule.constant is None:
        schedule.validate(float(times[-1]))
    base = np.array(x0.coords if isinstance(x0, BoundaryPoint) else x0, dtype=float)
    cones = np.array([base + schedule.xi(0.0, t) for t in times])
    scales = np.array([schedule.decay(0.0, t) for t in times])
    # guard against rounding making consecutive cones decrease
    cones = np.maximum.accumulate(cones, axis=0)
    return cones, scales


def strong_construct(path: BrownianPath, x0: BoundaryPoint, schedule: DriftSchedule, times) -> PathSample:
    """``X_t = C(0, t) D_{x0 + Xi(0, t)}`` at each of ``times`` along one Brownian path."""
    cones, scales = cone_schedule(x0, schedule, times)
    records = d_process(path, cones)
    states = np.array([s * np.array(r.exit_point.coords) for s, r in zip(scales, records)])
    prov = {"scheme": "strong-construction", "step": path.step, "seed": path.seed,
            "cones": cones.tolist(), "exit_times": [r.exit_time for r in records]}
    return PathSample(np.asarray(times, dtype=float), states, prov)


def strong_marginals(x0, schedule: DriftSchedule, times, n: int, seed: int, step: float = DEFAULT_STEP,
                     budget: int = DEFAULT_BUDGET, workers: int | None = None) -> np.ndarray:
    """Strong-construction states for ``n`` paths: array ``(n, len(times), 2)``."""
    cones, scales = cone_schedule(x0, schedule, times)
    ex = nested_exits(cones, n, seed, step=step, budget=budget, workers=workers)
    return ex[:, :, :2] * scales[None, :, None]

"""The infinite-rate process X on E.

Transitions are exact: from ``x`` over time ``t`` the next state is drawn from
Q at ``e^{-ct} x + (1 - e^{-ct}) theta``.  :func:`trotter_path` alternates the
drift flow on an epsilon-grid with Q-distributed jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .harmonic import q_sample
from .kernels import BoundaryPoint, QuadrantPoint
from .paths import PathSample, on_boundary
from .rng import map_chunks, stream


@dataclass(frozen=True)
class ImubParams:
    c: float
    theta: tuple[float, float]

    def __post_init__(self):
        th = tuple(float(t) for t in self.theta)
        object.__setattr__(self, "theta", th)
        if self.c < 0 or min(th) < 0:
            raise ValueError("c and theta must be nonnegative")


@dataclass(frozen=True)
class TrotterConfig:
    epsilon: float
    horizon: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.epsilon <= self.horizon:
            raise ValueError("need 0 < epsilon <= horizon")


def as_coords(x) -> np.ndarray:
    if isinstance(x, BoundaryPoint):
        return np.array(x.coords)
    if isinstance(x, QuadrantPoint):
        return np.array([x.x1, x.x2])
    return np.asarray(x, dtype=float)


def drift_flow(params: ImubParams, x, t) -> np.ndarray:
    """``e^{-ct} x + (1 - e^{-ct}) theta``, the kernel argument of the exact transition."""
    decay = math.exp(-params.c * t)
    return decay * as_coords(x) + (1.0 - decay) * np.asarray(params.theta)


def transition_sample(params: ImubParams, x, t: float, rng: np.random.Generator, size=None) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be nonnegative")
    w = drift_flow(params, x, t)
    if size is not None and w.ndim == 1:
        w = np.broadcast_to(w, tuple(np.atleast_1d(size)) + (2,))
    return q_sample(w[..., 0], w[..., 1], rng)


def transition_point(params: ImubParams, x: BoundaryPoint, t: float, rng: np.random.Generator) -> BoundaryPoint:
    if t == 0:
        return x
    y = transition_sample(params, x, t, rng)
    return BoundaryPoint.from_coords(float(y[0]), float(y[1]))


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be a nonempty strictly increasing sequence starting at or after 0")
    return times


def path_sample(params: ImubParams, x0, times, rng: np.random.Generator, n: int | None = None) -> PathSample:
    """Chain exact transitions over consecutive gaps; ``x0`` is the state at time 0.

    A start off E first jumps according to Q at the start (flagged in the
    provenance), so the path has a jump at time 0.
    """
    times = _check_times(times)
    x = as_coords(x0)
    if n is not None:
        x = np.broadcast_to(x, (n, 2)).copy()
    jump_at_zero = not bool(on_boundary(as_coords(x0)))
    if jump_at_zero:
        x = q_sample(x[..., 0], x[..., 1], rng)
    states = []
    prev = 0.0
    for t in times:
        if t > prev:
            x = transition_sample(params, x, t - prev, rng)
        states.append(np.array(x, dtype=float))
        prev = t
    states = np.stack(states, axis=-2)
    prov = {"scheme": "exact-kernel", "c": params.c, "theta": list(params.theta), "initial_jump": jump_at_zero}
    return PathSample(times, states, prov)


# ---------------------------------------------------------------------------
# Trotter scheme


def trotter_run(params: ImubParams, x0, eps: float, n_steps: int, rng: np.random.Generator,
                n: int, on_step: Callable[[int, np.ndarray, np.ndarray], None] | None = None) -> np.ndarray:
    """Run ``n_steps`` drift-then-jump steps for ``n`` paths; returns the final grid state.

    ``on_step(k, pre, post)`` sees the pre-jump and post-jump states at grid
    time ``k * eps``.  A start off E jumps once before the first step.
    """
    x = np.broadcast_to(as_coords(x0), (n, 2)).astype(float)
    if not on_boundary(as_coords(x0)):
        x = q_sample(x[:, 0], x[:, 1], rng)
    decay = math.exp(-params.c * eps)
    shift = (1.0 - decay) * np.asarray(params.theta)
    for k in range(1, n_steps + 1):
        pre = decay * x + shift
        x = q_sample(pre[:, 0], pre[:, 1], rng)
        if on_step is not None:
            on_step(k, pre, x)
    return x


def _grid_index(t: float, eps: float) -> tuple[int, float]:
    k = math.floor(t / eps + 1e-9)
    return k, max(t - k * eps, 0.0)


def trotter_path(params: ImubParams, x0, config: TrotterConfig, record_times,
                 rng: np.random.Generator | None = None, n: int | None = None) -> PathSample:
    """Trotter approximation recorded at ``record_times`` (within the horizon).

    Grid times hold post-jump states on E; times strictly between grid points
    hold the drift flow from the last jump, which may leave E.
    """
    times = _check_times(record_times)
    if times[-1] > config.horizon + 1e-12:
        raise ValueError("record times exceed the horizon")
    rng = stream(config.seed) if rng is None else rng
    eps = config.epsilon
    size = 1 if n is None else n
    slots = [_grid_index(t, eps) for t in times]
    by_grid: dict[int, list[int]] = {}
    for j, (k, _) in enumerate(slots):
        by_grid.setdefault(k, []).append(j)
    out = np.empty((size, len(times), 2))

    def record(k, x):
        for j in by_grid.get(k, ()):
            out[:, j] = drift_flow(params, x, slots[j][1])

    x0c = as_coords(x0)
    x = np.broadcast_to(x0c, (size, 2)).astype(float)
    initial_jump = not bool(on_boundary(x0c))
    if initial_jump:
        x = q_sample(x[:, 0], x[:, 1], rng)
    record(0, x)
    decay = math.exp(-params.c * eps)
    shift = (1.0 - decay) * np.asarray(params.theta)
    last = max(k for k, _ in slots)
    for k in range(1, last + 1):
        pre = decay * x + shift
        x = q_sample(pre[:, 0], pre[:, 1], rng)
        record(k, x)
    states = out[0] if n is None else out
    prov = {"scheme": "trotter", "epsilon": eps, "seed": config.seed, "c": params.c,
            "theta": list(params.theta), "initial_jump": initial_jump}
    return PathSample(times, states, prov)


def _trotter_marginal_chunk(params, x0, eps, n_steps, rng, size):
    return trotter_run(params, x0, eps, n_steps, rng, size)


def trotter_marginal(params: ImubParams, x0, eps: float, t: float, n: int, seed: int,
                     workers: int | None = None) -> np.ndarray:
    """Grid-time marginal at ``t`` (a multiple of ``eps``) over ``n`` paths."""
    k, rest = _grid_index(t, eps)
    if rest > 1e-9 * eps:
        raise ValueError("t must be a grid time")
    fn = partial(_trotter_marginal_chunk, params, tuple(as_coords(x0)), eps, k)
    return map_chunks(fn, n, seed, key=(1,), workers=workers)


def _transition_chunk(params, x0, t, rng, size):
    return transition_sample(params, np.asarray(x0), t, rng, size=size)


def transition_marginal(params: ImubParams, x0, t: float, n: int, seed: int,
                        workers: int | None = None) -> np.ndarray:
    fn = partial(_transition_chunk, params, tuple(as_coords(x0)), t)
    return map_chunks(fn, n, seed, key=(0,), workers=workers)

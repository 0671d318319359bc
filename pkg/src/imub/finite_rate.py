"""Finite branching rate: the SDEs for Y (with drift) and Z (pure noise), and the dual flow.

``dY_i = c (theta_i - Y_i) dt + sqrt(gamma Y_1 Y_2) dW_i``.

Two integrators are provided.

``euler``
    Explicit Euler-Maruyama with full truncation: the diffusion coefficient
    uses the positive parts of the state and the post-step state is clamped
    to the quadrant.

``split``
    Lie splitting for large ``gamma``: each outer step of length ``H`` runs
    the exact drift flow and then the pure-noise equation for time ``H``.
    The noise part is a planar Brownian motion run on the clock
    ``int ds / (gamma Z_1 Z_2)``; it is walked with steps proportional to
    the distance to the axes and finished with an exact draw from Q once a
    Feller bound says absorption before the end of the step is all but
    certain.  The cost per unit time does not grow with ``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numba as nb
import numpy as np

from .kernels import BoundaryPoint, QuadrantPoint
from .paths import PathSample
from .rng import map_chunks

BLOWUP_CAP = 1e12
SPLIT_ETA = 0.25
SPLIT_TOL = 1e-3
# absorption snap for Z: min coordinate below SNAP_MIN and SNAP_RATIO times smaller than the other
SNAP_MIN = 1e-10
SNAP_RATIO = 1e6


class NumericalBlowup(RuntimeError):
    pass


@dataclass(frozen=True)
class SdeConfig:
    gamma: float
    c: float
    theta: tuple[float, float]
    step: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "theta", (float(self.theta[0]), float(self.theta[1])))
        if self.step <= 0 or self.gamma < 0 or self.c < 0 or min(self.theta) < 0:
            raise ValueError("need step > 0 and nonnegative gamma, c, theta")


@dataclass(frozen=True)
class DualState:
    y1: BoundaryPoint
    y2: QuadrantPoint


def dual_flow(state: DualState, c: float, t: float) -> DualState:
    """Deterministic dual: ``(e^{-ct} y1, (1 - e^{-ct}) y1 + y2)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    decay = math.exp(-c * t)
    a1, a2 = state.y1.coords
    return DualState(BoundaryPoint.from_coords(decay * a1, decay * a2),
                     QuadrantPoint((1 - decay) * a1 + state.y2.x1, (1 - decay) * a2 + state.y2.x2))


# ---------------------------------------------------------------------------
# kernels


@nb.njit(cache=True)
def _euler_run(rng, n, y1, y2, gamma, c, th1, th2, h, rec, cap, absorb, c_int):
    """Euler paths recorded after ``rec[j]`` steps; also ``int_0^t c_int e^{-c_int r} Y_r dr``."""
    m = rec.shape[0]
    out = np.empty((n, m, 2))
    integ = np.zeros((n, 2))
    total = rec[m - 1]
    blown = False
    for i in range(n):
        a = y1
        b = y2
        j = 0
        i1 = 0.0
        i2 = 0.0
        while j < m and rec[j] == 0:
            out[i, j, 0] = a
            out[i, j, 1] = b
            j += 1
        k = 0
        while k < total:
            k += 1
            s = math.sqrt(gamma * a * b * h)
            na = a + c * (th1 - a) * h
            nb_ = b + c * (th2 - b) * h
            if s > 0.0:
                na += s * rng.standard_normal()
                nb_ += s * rng.standard_normal()
            if na < 0.0:
                na = 0.0
            if nb_ < 0.0:
                nb_ = 0.0
            if na > cap or nb_ > cap:
                blown = True
            if c_int > 0.0:
                w0 = c_int * math.exp(-c_int * (k - 1) * h)
                w1 = c_int * math.exp(-c_int * k * h)
                i1 += 0.5 * h * (w0 * a + w1 * na)
                i2 += 0.5 * h * (w0 * b + w1 * nb_)
            a = na
            b = nb_
            if absorb:
                lo = min(a, b)
                if lo > 0.0 and lo < SNAP_MIN and max(a, b) > SNAP_RATIO * lo:
                    if a < b:
                        a = 0.0
                    else:
                        b = 0.0
                if a == 0.0 or b == 0.0:
                    # frozen from here on: finish the records and the integral in closed form
                    while j < m:
                        out[i, j, 0] = a
                        out[i, j, 1] = b
                        j += 1
                    if c_int > 0.0:
                        rest = math.exp(-c_int * k * h) - math.exp(-c_int * total * h)
                        i1 += a * rest
                        i2 += b * rest
                    break
            while j < m and rec[j] == k:
                out[i, j, 0] = a
                out[i, j, 1] = b
                j += 1
        integ[i, 0] = i1
        integ[i, 1] = i2
    return out, integ, blown


@nb.njit(cache=True)
def _q_draw(rng, u, v):
    # exact draw from Q_(u,v) for an interior start; same construction as harmonic.q_sample
    bu = rng.random()
    qu = rng.random()
    a = math.atan2(u * u - v * v, 2.0 * u * v)
    mass1 = 0.5 + a / math.pi
    if bu < mass1:
        p = qu * mass1
        m = math.sqrt((u * u + v * v) * math.sin(math.pi * p) / math.cos(math.pi * p - a))
        return m, 0.0
    p = qu * (1.0 - mass1)
    m = math.sqrt((u * u + v * v) * math.sin(math.pi * p) / math.cos(math.pi * p + a))
    return 0.0, m


@nb.njit(cache=True)
def _noise_phase(rng, a, b, clock, eta, tol):
    """Run the pure-noise equation from ``(a, b)`` for ``clock`` units of ``gamma``-time."""
    if a <= 0.0 or b <= 0.0 or clock <= 0.0:
        return a, b
    left = clock
    while True:
        lo = min(a, b)
        hi = max(a, b)
        # Feller bound on the chance of not being absorbed within the remaining clock
        if 2.0 * lo / (hi * left) < tol:
            return _q_draw(rng, a, b)
        rate0 = 1.0 / (a * b)
        dsig = (eta * lo) ** 2
        last = False
        if dsig * rate0 >= left:
            dsig = left / rate0
            last = True
        sd = math.sqrt(dsig)
        na = a + sd * rng.standard_normal()
        nb_ = b + sd * rng.standard_normal()
        if na <= 0.0 or nb_ <= 0.0:
            return _q_draw(rng, a, b)
        left -= 0.5 * dsig * (rate0 + 1.0 / (na * nb_))
        a = na
        b = nb_
        if last or left <= 0.0:
            return a, b


@nb.njit(cache=True)
def _split_run(rng, n, y1, y2, gamma, c, th1, th2, H, rec, eta, tol, cap):
    m = rec.shape[0]
    out = np.empty((n, m, 2))
    total = rec[m - 1]
    decay = math.exp(-c * H)
    blown = False
    ptol = tol * H
    for i in range(n):
        a = y1
        b = y2
        j = 0
        while j < m and rec[j] == 0:
            out[i, j, 0] = a
            out[i, j, 1] = b
            j += 1
        for k in range(1, total + 1):
            a = th1 + decay * (a - th1)
            b = th2 + decay * (b - th2)
            a, b = _noise_phase(rng, a, b, gamma * H, eta, ptol)
            if a > cap or b > cap:
                blown = True
            while j < m and rec[j] == k:
                out[i, j, 0] = a
                out[i, j, 1] = b
                j += 1
    return out, blown


# ---------------------------------------------------------------------------
# drivers


def _record_steps(times, h) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing from 0 or later")
    steps = np.rint(times / h).astype(np.int64)
    if np.any(np.abs(steps * h - times) > 1e-9 * np.maximum(1.0, times)):
        raise ValueError(f"record times must be multiples of the step {h}")
    return steps


def _coords(p) -> tuple[float, float]:
    if isinstance(p, BoundaryPoint):
        return p.coords
    if isinstance(p, QuadrantPoint):
        return (p.x1, p.x2)
    return (float(p[0]), float(p[1]))


def _euler_chunk(y0, gamma, c, theta, h, rec, absorb, c_int, rng, size):
    out, integ, blown = _euler_run(rng, size, y0[0], y0[1], gamma, c, theta[0], theta[1], h, rec,
                                   BLOWUP_CAP, absorb, c_int)
    if blown:
        raise NumericalBlowup(f"state exceeded {BLOWUP_CAP:g}; reduce the step for gamma={gamma}")
    return np.concatenate([out.reshape(size, -1), integ], axis=1)


def _split_chunk(y0, gamma, c, theta, H, rec, eta, tol, rng, size):
    out, blown = _split_run(rng, size, y0[0], y0[1], gamma, c, theta[0], theta[1], H, rec, eta, tol, BLOWUP_CAP)
    if blown:
        raise NumericalBlowup(f"state exceeded {BLOWUP_CAP:g}")
    return out.reshape(size, -1)


def simulate_Y(config: SdeConfig, y0, times, n: int | None = None, scheme: str = "euler",
               workers: int | None = None, eta: float = SPLIT_ETA, tol: float = SPLIT_TOL) -> PathSample:
    """Simulate ``n`` paths (one if ``n`` is None) recorded at ``times``.

    For ``scheme="split"`` the outer step is ``config.step``.
    """
    y0 = _coords(y0)
    if min(y0) < 0:
        raise ValueError("y0 must lie in the quadrant")
    rec = _record_steps(times, config.step)
    size = 1 if n is None else n
    m = rec.shape[0]
    if scheme == "euler":
        fn = partial(_euler_chunk, y0, config.gamma, config.c, config.theta, config.step, rec, False, 0.0)
        flat = map_chunks(fn, size, config.seed, key=(4,), workers=workers)
        states = flat[:, :2 * m].reshape(size, m, 2)
    elif scheme == "split":
        fn = partial(_split_chunk, y0, config.gamma, config.c, config.theta, config.step, rec, eta, tol)
        states = map_chunks(fn, size, config.seed, key=(5,), workers=workers).reshape(size, m, 2)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    prov = {"scheme": scheme, "step": config.step, "seed": config.seed, "gamma": config.gamma,
            "c": config.c, "theta": list(config.theta)}
    return PathSample(np.asarray(times, dtype=float), states[0] if n is None else states, prov)


def simulate_Z_with_integral(gamma: float, z0, step: float, seed: int, t: float, n: int, c: float,
                             workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``Z_t`` and ``int_0^t c e^{-cr} Z_r dr`` (trapezoid on the step grid) for ``n`` paths."""
    rec = _record_steps([t], step)
    fn = partial(_euler_chunk, _coords(z0), gamma, 0.0, (0.0, 0.0), step, rec, True, float(c))
    flat = map_chunks(fn, n, seed, key=(6,), workers=workers)
    return flat[:, :2], flat[:, 2:]


def simulate_Z(gamma: float, z0, step: float, seed: int, times, n: int | None = None,
               workers: int | None = None) -> PathSample:
    """Pure-noise equation (``c = 0``) with absorption on E."""
    z0 = _coords(z0)
    rec = _record_steps(times, step)
    size = 1 if n is None else n
    m = rec.shape[0]
    fn = partial(_euler_chunk, z0, gamma, 0.0, (0.0, 0.0), step, rec, True, 0.0)
    flat = map_chunks(fn, size, seed, key=(6,), workers=workers)
    states = flat[:, :2 * m].reshape(size, m, 2)
    prov = {"scheme": "euler-absorbed", "step": step, "seed": seed, "gamma": gamma}
    return PathSample(np.asarray(times, dtype=float), states[0] if n is None else states, prov)

"""Harmonic measure of planar Brownian motion exiting the open quadrant.

``Q_(u,v)`` is the law of the exit point of a planar Brownian motion started
at ``(u, v)``.  For an interior start it has a density on each axis; the
within-axis CDF has an arctan antiderivative, which gives exact inverse-CDF
sampling.  For a start on the boundary the measure is the atom at the start.

The jump measure ``nu`` is the sigma-finite measure on E governing jumps away
from ``(1, 0)`` under a unit drift along the second coordinate.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np
from scipy import integrate

from .kernels import BoundaryPoint, Branch

FOUR_OVER_PI = 4.0 / math.pi

# quadrature defaults
QUAD_EPSABS = 1e-9
TAIL_START = 1e3
NU_SINGULAR_GAP = 1e-6


class DegenerateStart(ValueError):
    """The start lies on E, so Q is an atom and has no density."""


class InvalidExponent(ValueError):
    pass


class SingularPoint(ValueError):
    pass


class NonIntegrable(ValueError):
    pass


def _check_interior(u: float, v: float) -> None:
    if u < 0 or v < 0:
        raise ValueError(f"start ({u}, {v}) is outside the quadrant")
    if u == 0 or v == 0:
        raise DegenerateStart(f"start ({u}, {v}) lies on E; Q is the atom there")


# ---------------------------------------------------------------------------
# closed forms


def q_density(u: float, v: float, point: BoundaryPoint) -> float:
    _check_interior(u, v)
    if point.branch is Branch.AXIS2:
        u, v = v, u
    m = point.magnitude
    return FOUR_OVER_PI * u * v * m / (4 * u * u * v * v + (m * m + v * v - u * u) ** 2)


def q_density_axis(u, v, m, axis: int = 1):
    """Vectorized density along ``axis`` at magnitudes ``m``."""
    if axis == 2:
        u, v = v, u
    m = np.asarray(m, dtype=float)
    return FOUR_OVER_PI * u * v * m / (4 * u * u * v * v + (m * m + v * v - u * u) ** 2)


def _skew(u, v):
    # arctan((u^2 - v^2) / (2uv)), written so that it survives u or v -> 0
    return np.arctan2(np.multiply(u, u) - np.multiply(v, v), 2 * np.multiply(u, v))


def q_branch_mass(u: float, v: float) -> tuple[float, float]:
    _check_interior(u, v)
    mass1 = 0.5 + float(_skew(u, v)) / math.pi
    return mass1, 1.0 - mass1


def _within_cdf(u, v, m):
    # F_1(m) = (arctan((m^2+v^2-u^2)/(2uv)) + arctan((u^2-v^2)/(2uv))) / pi,
    # combined into one atan2 to avoid cancellation at small m
    m2 = np.multiply(m, m)
    uu, vv = np.multiply(u, u), np.multiply(v, v)
    uv2 = 2 * np.multiply(u, v)
    return np.arctan2(uv2 * m2, uv2 * uv2 + (m2 + vv - uu) * (vv - uu)) / math.pi


def q_cdf(u: float, v: float, point: BoundaryPoint) -> float:
    """Q_(u,v) of the segment from the origin to ``point`` on its own axis."""
    _check_interior(u, v)
    if point.branch is Branch.ORIGIN:
        return 0.0
    if point.branch is Branch.AXIS2:
        u, v = v, u
    if math.isinf(point.magnitude):
        return 0.5 + float(_skew(u, v)) / math.pi
    return float(_within_cdf(u, v, point.magnitude))


def _within_quantile(u, v, p):
    # inverse of _within_cdf for p in [0, mass1):
    # m^2 = (u^2 + v^2) sin(pi p) / cos(pi p - skew)
    a = _skew(u, v)
    return np.sqrt((np.multiply(u, u) + np.multiply(v, v)) * np.sin(math.pi * p) / np.cos(math.pi * p - a))


def q_quantile(u: float, v: float, axis: int, p: float) -> float:
    """Magnitude m on ``axis`` with within-axis CDF equal to ``p``."""
    _check_interior(u, v)
    if axis == 2:
        u, v = v, u
    mass = 0.5 + float(_skew(u, v)) / math.pi
    if not 0 <= p < mass:
        raise ValueError(f"quantile {p} outside [0, {mass})")
    return float(_within_quantile(u, v, p))


def signed_cdf(w, u: float, v: float):
    """CDF of ``x1 - x2`` under Q_(u,v) for an interior start."""
    _check_interior(u, v)
    w = np.asarray(w, dtype=float)
    mass2 = 0.5 - float(_skew(u, v)) / math.pi
    m = np.abs(w)
    pos = mass2 + _within_cdf(u, v, m)
    neg = mass2 - _within_cdf(v, u, m)
    return np.where(w >= 0, pos, neg)


def q_sample(u, v, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw from Q_(u,v); returns coordinates with shape ``(..., 2)``.

    ``u`` and ``v`` broadcast against each other and against ``size``.  Each
    draw consumes two uniforms, branch first, magnitude second, also for
    starts on E where the result is the start itself.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = np.broadcast_shapes(u.shape, v.shape) if size is None else tuple(np.atleast_1d(size))
    u = np.broadcast_to(u, shape)
    v = np.broadcast_to(v, shape)
    uni = rng.random(shape + (2,))
    out = np.zeros(shape + (2,))

    interior = (u > 0) & (v > 0)
    out[~interior, 0] = u[~interior]
    out[~interior, 1] = v[~interior]

    ui, vi = u[interior], v[interior]
    b, q = uni[interior, 0], uni[interior, 1]
    mass1 = 0.5 + _skew(ui, vi) / math.pi
    on1 = b < mass1
    with np.errstate(invalid="ignore", divide="ignore"):
        m1 = _within_quantile(ui, vi, q * mass1)
        m2 = _within_quantile(vi, ui, q * (1.0 - mass1))
    res = np.zeros(ui.shape + (2,))
    res[on1, 0] = m1[on1]
    res[~on1, 1] = m2[~on1]
    out[interior] = res
    return out


def q_sample_point(u: float, v: float, rng: np.random.Generator) -> BoundaryPoint:
    x1, x2 = q_sample(u, v, rng)
    return BoundaryPoint.from_coords(float(x1), float(x2))


# ---------------------------------------------------------------------------
# quadrature


def _quad_real(g: Callable[[float], float], a: float, b: float, epsabs: float, points=None) -> tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if points is not None and not math.isinf(b):
            pts = [p for p in points if a < p < b]
            val, err = integrate.quad(g, a, b, epsabs=epsabs, epsrel=1e-12, limit=500, points=pts or None)
        else:
            val, err = integrate.quad(g, a, b, epsabs=epsabs, epsrel=1e-12, limit=500)
    return val, err


def integrate_halfline(g: Callable[[float], complex | float], epsabs: float = QUAD_EPSABS,
                       points=(), lower: float = 0.0, tail_start: float = TAIL_START,
                       complex_valued: bool = False) -> tuple[complex | float, float]:
    """Integrate ``g`` over ``[lower, inf)``.

    Beyond ``tail_start`` the substitution ``m -> 1/m`` maps the tail onto
    a finite interval.  Returns ``(value, error_estimate)``.
    """
    parts = [np.real] if not complex_valued else [np.real, np.imag]
    top = max(tail_start, lower * 2 + 1.0)
    total = []
    err_total = 0.0
    for part in parts:
        body, e1 = _quad_real(lambda m: float(part(g(m))), lower, top, epsabs / 2, points=sorted(points))
        tail, e2 = _quad_real(lambda s: float(part(g(1.0 / s))) / (s * s) if s > 0 else 0.0,
                              0.0, 1.0 / top, epsabs / 2)
        total.append(body + tail)
        err_total += e1 + e2
    if complex_valued:
        return complex(total[0], total[1]), err_total
    return total[0], err_total


def q_integrate(f: Callable[[float, float], complex], u: float, v: float,
                epsabs: float = QUAD_EPSABS, complex_valued: bool = True) -> tuple[complex | float, float]:
    """``int f dQ_(u,v)`` for ``f(y1, y2)`` on E; atoms are evaluated directly."""
    if u == 0 or v == 0:
        return f(u, v), 0.0
    # the density peaks near |u^2 - v^2|^(1/2) with width ~ uv / peak
    peak1 = math.sqrt(abs(u * u - v * v))
    width = 2 * u * v / max(peak1, math.sqrt(2 * u * v))
    pts = sorted({max(peak1 - 3 * width, 0.0), peak1, peak1 + 3 * width, peak1 + 30 * width})
    pts = [p for p in pts if p > 0]
    val1, e1 = integrate_halfline(lambda m: f(m, 0.0) * q_density_axis(u, v, m, 1), epsabs / 2,
                                  points=pts, complex_valued=complex_valued)
    val2, e2 = integrate_halfline(lambda m: f(0.0, m) * q_density_axis(u, v, m, 2), epsabs / 2,
                                  points=pts, complex_valued=complex_valued)
    return val1 + val2, e1 + e2


def q_moment_bound(u: float, v: float, p: float) -> float:
    return abs(u * u - v * v) ** (p / 2) + 2 ** (p / 2) * (u * v) ** (p / 2) / math.cos(p * math.pi / 4)


def q_moment(u: float, v: float, coordinate: int, p: float, epsabs: float = QUAD_EPSABS) -> float:
    """``int x_i^p dQ_(u,v)`` for ``1 <= p < 2``."""
    if not 1 <= p < 2:
        raise InvalidExponent(f"moment exponent {p} outside [1, 2)")
    if coordinate not in (1, 2):
        raise ValueError("coordinate must be 1 or 2")
    if u == 0 or v == 0:
        return (u if coordinate == 1 else v) ** p
    uu, vv = (u, v) if coordinate == 1 else (v, u)
    peak = math.sqrt(abs(uu * uu - vv * vv))
    val, _ = integrate_halfline(lambda m: m ** p * q_density_axis(uu, vv, m, 1), epsabs,
                                points=[peak] if peak > 0 else ())
    return val


# ---------------------------------------------------------------------------
# jump measure


def nu_density(point: BoundaryPoint) -> float:
    m = point.magnitude
    if point.branch is Branch.AXIS1:
        if m == 1.0:
            raise SingularPoint("nu has a non-integrable singularity at axis1:1")
        return FOUR_OVER_PI * m / ((1 - m) ** 2 * (1 + m) ** 2)
    if point.branch is Branch.AXIS2:
        return FOUR_OVER_PI * m / (1 + m * m) ** 2
    return 0.0


def _nu1(u):
    return FOUR_OVER_PI * u / ((1 - u) ** 2 * (1 + u) ** 2)


def _nu2(v):
    return FOUR_OVER_PI * v / (1 + v * v) ** 2


def _check_compensation(f, value, slope):
    def ratio(s):
        return max(abs(f(1 + s, 0.0) - value - s * slope), abs(f(1 - s, 0.0) - value + s * slope)) / (s * s)

    coarse, fine = ratio(1e-2), ratio(1e-3)
    if fine > 3 * coarse + 1e-3:
        raise NonIntegrable("compensated integrand is not O((u-1)^2) at axis1:1; check value/slope")
    for axis in (1, 2):
        pt = (lambda r: f(r, 0.0)) if axis == 1 else (lambda r: f(0.0, r))
        g4, g6 = abs(pt(1e4)) / 1e4, abs(pt(1e6)) / 1e6
        if not (math.isfinite(g4) and math.isfinite(g6)) or g6 > 10 * g4 + 1.0:
            raise NonIntegrable(f"integrand grows faster than linearly along axis {axis}")


def nu_integrate(f: Callable[[float, float], complex], value: complex, slope: complex,
                 epsabs: float = QUAD_EPSABS, gap: float = NU_SINGULAR_GAP,
                 check: bool = True) -> tuple[complex, float]:
    """Compensated integral ``int [f(y) - value - (y1 - 1) slope] nu(dy)``.

    ``value`` and ``slope`` are ``f`` and its derivative along axis 1 at
    ``(1, 0)``.  The window ``[1 - gap, 1 + gap]`` around the singularity is
    covered by a two-point rule; the compensated integrand is bounded there.
    Returns ``(value, error_estimate)``.
    """
    if check:
        _check_compensation(f, value, slope)

    def g1(u):
        return (f(u, 0.0) - value - (u - 1.0) * slope) * _nu1(u)

    def g2(v):
        return (f(0.0, v) - value + slope) * _nu2(v)

    parts = []
    err = 0.0
    for part in (np.real, np.imag):
        left, e1 = _quad_real(lambda u: float(part(g1(u))), 0.0, 1.0 - gap, epsabs / 8, points=[0.5, 0.9, 0.99])
        right, e2 = integrate_halfline(lambda u: float(part(g1(u))), epsabs / 8, points=[1.01, 1.1, 1.5, 3.0],
                                       lower=1.0 + gap)
        window = gap * float(part(g1(1.0 - gap) + g1(1.0 + gap)))
        axis2, e3 = integrate_halfline(lambda v: float(part(g2(v))), epsabs / 8, points=[1.0])
        parts.append(left + window + right + axis2)
        err += e1 + e2 + e3
    return complex(parts[0], parts[1]), err

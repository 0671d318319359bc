"""The generator of the infinite-rate process on smooth test functions.

On the axis ``x = (x1, 0)`` with ``x1 > 0`` the transversal generator is the
compensated jump integral

    G2 f(x) = (1/x1) * int [f(x1 y) - f(x) - x1 (y1 - 1) d1 f(x)] nu(dy),

and ``G2 f(x) = d2 f(x)`` on the second axis.  ``G1`` is ``G2`` conjugated by
the coordinate swap, and ``G f(x) = sum_i c (theta_i - x_i) G_i f(x)``.
On the duality functions ``F(., z)`` this reduces to the closed form
``F(x, z) * [c (theta - x) <> z]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .harmonic import QUAD_EPSABS, nu_integrate, q_integrate
from .infinite_rate import ImubParams
from .kernels import BoundaryPoint, kernel_F, lozenge

DECAY_MAGNITUDES = (1e2, 1e3, 1e4)


class DecayViolation(ValueError):
    pass


@dataclass(frozen=True)
class TestFunction:
    """A function on E with its axis derivatives.

    ``value(y1, y2)`` is evaluated on E (one argument zero); ``d1(r)`` is the
    derivative along the first axis at ``(r, 0)`` and ``d2(r)`` the derivative
    along the second axis at ``(0, r)``.  ``d1_bound``/``d2_bound`` are the
    supplier's declared suprema of ``|d_i f|`` on the axes.
    """

    __test__ = False  # not a pytest class

    value: Callable[[float, float], complex]
    d1: Callable[[float], complex]
    d2: Callable[[float], complex]
    d1_bound: float = math.inf
    d2_bound: float = math.inf

    @classmethod
    def finite_difference(cls, value: Callable[[float, float], complex], h: float = 1e-5) -> "TestFunction":
        """Axis derivatives by central differences (forward differences near the origin).

        The compensation in ``apply_G2`` cancels only to the accuracy of
        ``d1``, so expect relative errors of order ``h**2`` rather than
        quadrature precision.
        """

        def diff(g, r):
            if r > h:
                return (g(r + h) - g(r - h)) / (2 * h)
            return (g(r + h) - g(r)) / h

        return cls(value, lambda r: diff(lambda s: value(s, 0.0), r), lambda r: diff(lambda s: value(0.0, s), r))

    def __call__(self, x: BoundaryPoint) -> complex:
        return self.value(*x.coords)

    def dagger(self) -> "TestFunction":
        """``f(x1, x2) -> f(x2, x1)``."""
        return TestFunction(lambda a, b: self.value(b, a), self.d2, self.d1, self.d2_bound, self.d1_bound)

    def check_decay(self, magnitudes: Sequence[float] = DECAY_MAGNITUDES, tol: float = 1e-3) -> None:
        """Spot-check ``r d_i f`` -> 0 along both axes and the declared derivative bounds."""
        for name, d, bound in (("d1", self.d1, self.d1_bound), ("d2", self.d2, self.d2_bound)):
            vals = [abs(r * d(r)) for r in magnitudes]
            if vals[-1] > tol and not vals[-1] < vals[0]:
                raise DecayViolation(f"r*{name}(r) does not decay: {vals}")
            for r in (0.0, *magnitudes):
                if abs(d(r)) > bound * (1 + 1e-12):
                    raise DecayViolation(f"|{name}({r})| exceeds the declared bound {bound}")


def duality_test_function(z: BoundaryPoint) -> TestFunction:
    """``F(., z)`` with its exact axis derivatives ``(e_i <> z) F``."""
    zq = z.coords
    e1 = lozenge((1.0, 0.0), zq)
    e2 = lozenge((0.0, 1.0), zq)
    # |F| <= 1 on E, so |d_i F| <= |e_i <> z|
    return TestFunction(
        value=lambda a, b: kernel_F((a, b), zq),
        d1=lambda r: e1 * kernel_F((r, 0.0), zq),
        d2=lambda r: e2 * kernel_F((0.0, r), zq),
        d1_bound=abs(e1),
        d2_bound=abs(e2),
    )


@dataclass(frozen=True)
class GeneratorResult:
    value: complex
    quadrature_error_estimate: float


def apply_G2(f: TestFunction, x: BoundaryPoint, tol: float = QUAD_EPSABS) -> GeneratorResult:
    x1, x2 = x.coords
    if x1 == 0.0:
        return GeneratorResult(complex(f.d2(x2)), 0.0)
    s = x1
    val, err = nu_integrate(lambda a, b: f.value(s * a, s * b), complex(f.value(s, 0.0)), s * complex(f.d1(s)),
                            epsabs=tol * s)
    return GeneratorResult(val / s, err / s)


def apply_G1(f: TestFunction, x: BoundaryPoint, tol: float = QUAD_EPSABS) -> GeneratorResult:
    return apply_G2(f.dagger(), x.swap(), tol)


def apply_G(params: ImubParams, f: TestFunction, x: BoundaryPoint, tol: float = QUAD_EPSABS) -> GeneratorResult:
    """``c (theta_1 - x_1) G1 f(x) + c (theta_2 - x_2) G2 f(x)``; zero weights skip the quadrature."""
    x1, x2 = x.coords
    total, err = 0j, 0.0
    for w, op in ((params.c * (params.theta[0] - x1), apply_G1), (params.c * (params.theta[1] - x2), apply_G2)):
        if w != 0.0:
            r = op(f, x, tol / 2 / abs(w))
            total += w * r.value
            err += abs(w) * r.quadrature_error_estimate
    return GeneratorResult(total, err)


def generator_on_F(params: ImubParams, z: BoundaryPoint, x: BoundaryPoint) -> complex:
    """Closed form ``F(x, z) * [c (theta - x) <> z]``."""
    xq = x.coords
    drift = (params.c * (params.theta[0] - xq[0]), params.c * (params.theta[1] - xq[1]))
    return kernel_F(xq, z.coords) * lozenge(drift, z.coords)


def semigroup_derivative(params: ImubParams, f: TestFunction, x: BoundaryPoint, eps_sequence: Sequence[float],
                         rel_tol: float = 1e-3) -> list[complex]:
    """Difference quotients ``(int f dQ_{x + eps c (theta - x)} - f(x)) / eps``.

    The integral is computed to absolute tolerance ``rel_tol * eps**2`` so the
    quadrature error in the quotient stays well below its ``O(eps)`` bias.
    """
    eps_sequence = [float(e) for e in eps_sequence]
    if any(e <= 0 for e in eps_sequence) or any(b >= a for a, b in zip(eps_sequence, eps_sequence[1:])):
        raise ValueError("eps_sequence must be positive and decreasing")
    x1, x2 = x.coords
    fx = complex(f.value(x1, x2))
    out = []
    for eps in eps_sequence:
        u = x1 + eps * params.c * (params.theta[0] - x1)
        v = x2 + eps * params.c * (params.theta[1] - x2)
        val, _ = q_integrate(f.value, u, v, epsabs=rel_tol * eps * eps)
        out.append((complex(val) - fx) / eps)
    return out


def observed_order(eps_sequence: Sequence[float], values: Sequence[complex], limit: complex) -> float:
    """Least-squares slope of ``log |value - limit|`` against ``log eps``."""
    errs = np.abs(np.asarray(values, dtype=complex) - limit)
    keep = errs > 0
    if keep.sum() < 2:
        return math.inf
    return float(np.polyfit(np.log(np.asarray(eps_sequence)[keep]), np.log(errs[keep]), 1)[0])

"""Duality kernels on the closed quadrant.

Points of ``[0, inf)^2`` are :class:`QuadrantPoint`; points of the boundary
``E`` (at most one coordinate nonzero) are :class:`BoundaryPoint`.  The
kernels return Python ``complex`` values for scalar arguments; the ``*_arr``
variants accept arrays of shape ``(..., 2)`` and broadcast.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Branch(enum.Enum):
    AXIS1 = "axis1"
    AXIS2 = "axis2"
    ORIGIN = "origin"


@dataclass(frozen=True)
class QuadrantPoint:
    x1: float
    x2: float

    def __post_init__(self):
        if not (self.x1 >= 0 and self.x2 >= 0):
            raise ValueError(f"quadrant point needs nonnegative coordinates, got ({self.x1}, {self.x2})")

    def __iter__(self):
        yield self.x1
        yield self.x2

    @property
    def on_boundary(self) -> bool:
        return self.x1 == 0 or self.x2 == 0

    def to_boundary(self) -> "BoundaryPoint":
        return BoundaryPoint.from_coords(self.x1, self.x2)


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of E stored as (branch, magnitude).

    Use :meth:`axis1`, :meth:`axis2` or :meth:`origin` to build one; a zero
    magnitude always canonicalizes to the origin.
    """

    branch: Branch
    magnitude: float = 0.0

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise ValueError(f"magnitude must be nonnegative, got {self.magnitude}")
        if self.magnitude == 0 and self.branch is not Branch.ORIGIN:
            object.__setattr__(self, "branch", Branch.ORIGIN)
        if self.branch is Branch.ORIGIN and self.magnitude != 0:
            raise ValueError("origin has magnitude 0")

    @classmethod
    def axis1(cls, m: float) -> "BoundaryPoint":
        return cls(Branch.AXIS1, float(m))

    @classmethod
    def axis2(cls, m: float) -> "BoundaryPoint":
        return cls(Branch.AXIS2, float(m))

    @classmethod
    def origin(cls) -> "BoundaryPoint":
        return cls(Branch.ORIGIN, 0.0)

    @classmethod
    def from_coords(cls, x1: float, x2: float) -> "BoundaryPoint":
        if x1 < 0 or x2 < 0:
            raise ValueError(f"({x1}, {x2}) is outside the quadrant")
        if x1 != 0 and x2 != 0:
            raise ValueError(f"({x1}, {x2}) is not on the boundary E")
        if x2 == 0:
            return cls.axis1(x1)
        return cls.axis2(x2)

    @classmethod
    def parse(cls, text: str) -> "BoundaryPoint":
        """Parse ``axis1:<m>``, ``axis2:<m>`` or ``origin``."""
        text = text.strip().lower()
        if text == "origin":
            return cls.origin()
        name, _, value = text.partition(":")
        if name == "axis1":
            return cls.axis1(float(value))
        if name == "axis2":
            return cls.axis2(float(value))
        raise ValueError(f"cannot parse boundary point {text!r}")

    @property
    def coords(self) -> tuple[float, float]:
        if self.branch is Branch.AXIS1:
            return (self.magnitude, 0.0)
        if self.branch is Branch.AXIS2:
            return (0.0, self.magnitude)
        return (0.0, 0.0)

    @property
    def signed(self) -> float:
        """Position on the signed line: axis1 positive, axis2 negative."""
        x1, x2 = self.coords
        return x1 - x2

    def to_quadrant(self) -> QuadrantPoint:
        return QuadrantPoint(*self.coords)

    def swap(self) -> "BoundaryPoint":
        x1, x2 = self.coords
        return BoundaryPoint.from_coords(x2, x1)

    def __str__(self) -> str:
        if self.branch is Branch.ORIGIN:
            return "origin"
        return f"{self.branch.value}:{self.magnitude:g}"


def _xy(p) -> tuple[float, float]:
    if isinstance(p, BoundaryPoint):
        return p.coords
    x1, x2 = p
    return float(x1), float(x2)


def lozenge(x, y) -> complex:
    """-(x1+x2)(y1+y2) + i(x1-x2)(y1-y2)."""
    x1, x2 = _xy(x)
    y1, y2 = _xy(y)
    return complex(-(x1 + x2) * (y1 + y2), (x1 - x2) * (y1 - y2))


def kernel_F(x, y) -> complex:
    w = lozenge(x, y)
    r = math.exp(w.real)
    return complex(r * math.cos(w.imag), r * math.sin(w.imag))


def kernel_H(x, x2, y, y2) -> complex:
    return kernel_F(x, y) * kernel_F(x2, y2)


def lozenge_arr(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    re = -(x[..., 0] + x[..., 1]) * (y[..., 0] + y[..., 1])
    im = (x[..., 0] - x[..., 1]) * (y[..., 0] - y[..., 1])
    return re + 1j * im


def kernel_F_arr(x, y) -> np.ndarray:
    return np.exp(lozenge_arr(x, y))

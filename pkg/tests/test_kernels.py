import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imub.kernels import (BoundaryPoint, Branch, QuadrantPoint, kernel_F, kernel_F_arr, kernel_H, lozenge,
                          lozenge_arr)

coord = st.floats(0, 5, allow_nan=False)
point = st.tuples(coord, coord)


def test_lozenge_examples():
    assert lozenge((1, 0), (1, 0)) == complex(-1, 1)
    assert lozenge((1, 1), (0.3, 2.5)) == complex(-2 * 2.8, 0)
    assert lozenge((0, 0), (3, 7)) == 0


def test_kernel_F_examples():
    assert kernel_F((2, 3), (0, 0)) == 1
    assert cmath.isclose(kernel_F((1, 0), (1, 0)), math.exp(-1) * complex(math.cos(1), math.sin(1)), rel_tol=1e-15)
    ref = math.exp(-0.5) * complex(math.cos(0.5), -math.sin(0.5))
    assert cmath.isclose(kernel_F((0, 1), (0.5, 0)), ref, rel_tol=1e-15)


def test_kernel_H_examples():
    assert kernel_H((1, 2), (3, 4), (0, 0), (0, 0)) == 1
    assert cmath.isclose(kernel_H((1, 0), (0, 1), (1, 0), (0, 1)), cmath.exp(complex(-2, 2)), rel_tol=1e-14)


@given(point, point, point, point)
def test_kernel_H_pair_swap(x, x2, y, y2):
    assert kernel_H(x, x2, y, y2) == pytest.approx(kernel_H(x2, x, y2, y), rel=1e-14, abs=1e-300)


@given(point, point)
def test_lozenge_symmetric(x, y):
    assert lozenge(x, y) == lozenge(y, x)


@given(point, point)
def test_modulus_bound(x, y):
    f = kernel_F(x, y)
    assert abs(f) <= 1 + 1e-15
    assert abs(f) == pytest.approx(math.exp(-(x[0] + x[1]) * (y[0] + y[1])), rel=1e-12, abs=1e-300)
    if (x[0] + x[1]) * (y[0] + y[1]) == 0:
        assert abs(f) == pytest.approx(1.0, abs=1e-15)


@given(point, coord, coord)
def test_conjugation(x, a, b):
    assert kernel_F(x, (a, b)) == pytest.approx(kernel_F(x, (b, a)).conjugate(), rel=1e-13, abs=1e-300)


@given(st.lists(point, min_size=1, max_size=5), point)
def test_array_kernels_agree(xs, y):
    arr = kernel_F_arr(np.array(xs), np.array(y))
    for a, x in zip(arr, xs):
        assert a == pytest.approx(kernel_F(x, y), rel=1e-13, abs=1e-300)
        assert lozenge_arr(np.array(x), np.array(y)) == pytest.approx(lozenge(x, y))


def test_derivative_identities_by_finite_differences():
    # Laplacian in the first argument is 8 y1 y2 F; directional derivative along z is (z <> y) F
    h = 1e-4
    grid = np.linspace(0.0, 2.0, 4)
    zdir = (0.7, -0.3)
    for x1 in grid + 0.5:
        for x2 in grid + 0.5:
            for y1 in grid:
                for y2 in grid:
                    y = (y1, y2)
                    F = lambda a, b: kernel_F((a, b), y)  # noqa: E731
                    f0 = F(x1, x2)
                    lap = (F(x1 + h, x2) + F(x1 - h, x2) + F(x1, x2 + h) + F(x1, x2 - h) - 4 * f0) / h**2
                    exact = 8 * y1 * y2 * f0
                    # relative accuracy, plus the roundoff floor of a second difference at step h
                    roundoff = 50 * np.finfo(float).eps * abs(f0) / h**2
                    assert abs(lap - exact) <= 1e-5 * abs(exact) + roundoff
                    dd = (F(x1 + h * zdir[0], x2 + h * zdir[1]) - F(x1 - h * zdir[0], x2 - h * zdir[1])) / (2 * h)
                    exact_d = lozenge(zdir, y) * f0
                    assert abs(dd - exact_d) <= 1e-5 * max(abs(exact_d), abs(f0)) + 1e-12


def test_boundary_point_canonicalization():
    assert BoundaryPoint.axis1(0) == BoundaryPoint.origin() == BoundaryPoint.axis2(0.0)
    assert BoundaryPoint.axis1(0).branch is Branch.ORIGIN
    assert BoundaryPoint.from_coords(0, 0) == BoundaryPoint.origin()
    assert BoundaryPoint.from_coords(3, 0) == BoundaryPoint.axis1(3)
    assert BoundaryPoint.from_coords(0, 2).coords == (0.0, 2.0)


def test_boundary_point_rejects_interior_and_negative():
    with pytest.raises(ValueError):
        BoundaryPoint.from_coords(1, 1)
    with pytest.raises(ValueError):
        BoundaryPoint.axis1(-1)
    with pytest.raises(ValueError):
        QuadrantPoint(-0.1, 1)


@pytest.mark.parametrize("text, coords", [("axis1:2.5", (2.5, 0.0)), ("axis2:1", (0.0, 1.0)), ("origin", (0.0, 0.0)),
                                          ("AXIS1:0", (0.0, 0.0))])
def test_parse(text, coords):
    p = BoundaryPoint.parse(text)
    assert p.coords == coords
    assert BoundaryPoint.parse(str(p)) == p


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        BoundaryPoint.parse("axis3:1")


@given(st.floats(0, 100), st.booleans())
def test_swap_is_involution(m, first):
    p = BoundaryPoint.axis1(m) if first else BoundaryPoint.axis2(m)
    assert p.swap().swap() == p
    assert p.swap().coords == p.coords[::-1]
    assert p.signed == p.coords[0] - p.coords[1]
    assert p.to_quadrant().to_boundary() == p

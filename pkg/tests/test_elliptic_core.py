"""Discrete Laplacian and the harmonic / screened Dirichlet kernels."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seglimit import (
    DomainSpec,
    ScalarField,
    apply_laplacian,
    boundary_points,
    build_grid,
    constant_field,
    solve_harmonic,
    solve_screened,
)
from seglimit.errors import SolverError


def boundary_array(g, fn):
    out = np.zeros(g.mask.shape)
    for p in boundary_points(g):
        v = fn(p)
        if g.ndim == 1:
            out[p.index[0]] = v
        else:
            out[p.index[1], p.index[0]] = v
    return out


def test_laplacian_constant_zero(unit_square_21):
    lap = apply_laplacian(constant_field(unit_square_21, 3.0))
    assert np.all(lap.values == 0.0)


def test_laplacian_quadratic_exact():
    g = build_grid(DomainSpec.interval(0.0, 1.0), 17)
    x = g.axis_coords(0)
    lap = apply_laplacian(ScalarField(g, x**2))
    assert np.allclose(lap.values[g.interior()], 2.0, atol=1e-11)


def test_laplacian_harmonic_quadratic_exact(unit_square_21):
    g = unit_square_21
    X, Y = g.node_coords()
    lap = apply_laplacian(ScalarField(g, X**2 - Y**2))
    assert np.allclose(lap.values[g.interior()], 0.0, atol=1e-11)


def test_harmonic_constant_boundary(unit_square_21):
    g = unit_square_21
    f, stats = solve_harmonic(g, boundary_array(g, lambda p: 2.5))
    assert np.allclose(f.values[g.in_domain()], 2.5, atol=1e-10)
    assert stats.converged


def test_harmonic_1d_linear_exact():
    g = build_grid(DomainSpec.interval(0.0, 1.0), 33)
    b = np.zeros(33)
    b[0], b[-1] = 1.0, -1.0
    f, _ = solve_harmonic(g, b)
    assert np.allclose(f.values, 1.0 - 2.0 * g.axis_coords(0), atol=1e-12)


def test_harmonic_disk_cosine_oracle(unit_disk_101):
    # exact harmonic extension of cos(theta) on the unit circle is x;
    # the staircase boundary carries O(h) error, measured 0.0099 at n=101
    # and 0.0131 at n=51
    g = unit_disk_101
    f, _ = solve_harmonic(g, boundary_array(g, lambda p: math.cos(p.param)))
    X, _ = g.node_coords()
    err = np.abs(f.values - X)[g.interior()].max()
    assert err <= 0.015


def test_harmonic_interior_residual(unit_disk_101):
    g = unit_disk_101
    f, _ = solve_harmonic(g, boundary_array(g, lambda p: math.cos(p.param)))
    lap = apply_laplacian(f)
    # residual scaled by h^2 (matrix rows carry 1/h^2)
    assert np.abs(lap.values[g.interior()]).max() * g.spacing[0] ** 2 <= 1e-8


def test_screened_reduces_to_harmonic(unit_square_21):
    g = unit_square_21
    b = boundary_array(g, lambda p: abs(p.coord[0]))
    fh, _ = solve_harmonic(g, b)
    fs, _ = solve_screened(g, np.zeros(g.mask.shape), b)
    assert np.allclose(fh.values, fs.values, atol=1e-12)


def test_screened_zero_boundary(unit_square_21):
    g = unit_square_21
    f, stats = solve_screened(g, np.full(g.mask.shape, 5.0), np.zeros(g.mask.shape))
    assert np.all(f.values == 0.0)
    assert stats.converged


def sinh_error(n: int, k: float) -> float:
    g = build_grid(DomainSpec.interval(0.0, 1.0), n)
    b = np.zeros(n)
    b[0] = 1.0
    u, _ = solve_screened(g, np.full(n, k), b)
    x = g.axis_coords(0)
    exact = np.sinh(math.sqrt(k) * (1.0 - x)) / math.sinh(math.sqrt(k))
    return float(np.abs(u.values - exact).max())


@pytest.mark.parametrize("k", [1.0, 25.0, 400.0])
def test_screened_sinh_second_order(k):
    ratio = sinh_error(101, k) / sinh_error(201, k)
    assert 3.5 <= ratio <= 4.5


def test_screened_rejects_negative_coefficient(unit_square_21):
    g = unit_square_21
    c = np.zeros(g.mask.shape)
    c[10, 10] = -1.0
    with pytest.raises(ValueError, match="nonnegative"):
        solve_screened(g, c, boundary_array(g, lambda p: 1.0))


def test_screened_rejects_negative_boundary(unit_square_21):
    g = unit_square_21
    with pytest.raises(ValueError, match="nonnegative"):
        solve_screened(g, np.zeros(g.mask.shape), boundary_array(g, lambda p: -1.0))


def test_screened_monotone_in_coefficient(unit_square_21):
    g = unit_square_21
    b = boundary_array(g, lambda p: 1.0 + p.coord[0])
    u1, _ = solve_screened(g, np.full(g.mask.shape, 1.0), b)
    u2, _ = solve_screened(g, np.full(g.mask.shape, 10.0), b)
    assert np.all(u2.values <= u1.values + 1e-12)


@settings(max_examples=30, deadline=None)
@given(data=st.data())
def test_screened_maximum_principle_exact(data):
    g = build_grid(DomainSpec.rectangle(0.0, 1.0, 0.0, 1.0), 9)
    pts = boundary_points(g)
    bvals = data.draw(st.lists(
        st.floats(0.0, 100.0, allow_nan=False), min_size=len(pts), max_size=len(pts)))
    cval = data.draw(st.floats(0.0, 1e6, allow_nan=False))
    b = np.zeros(g.mask.shape)
    for p, v in zip(pts, bvals):
        b[p.index[1], p.index[0]] = v
    u, _ = solve_screened(g, np.full(g.mask.shape, cval), b)
    M = max(bvals)
    assert np.all(u.values >= 0.0)
    assert np.all(u.values <= M)


@settings(max_examples=20, deadline=None)
@given(data=st.data())
def test_harmonic_linearity_and_comparison(data):
    g = build_grid(DomainSpec.interval(0.0, 1.0), 21)
    lo = data.draw(st.lists(st.floats(0, 10), min_size=2, max_size=2))
    hi = [v + data.draw(st.floats(0, 10)) for v in lo]
    a = data.draw(st.floats(-3, 3))
    b = data.draw(st.floats(-3, 3))
    g1 = np.zeros(21)
    g2 = np.zeros(21)
    g1[0], g1[-1] = lo
    g2[0], g2[-1] = hi
    f1, _ = solve_harmonic(g, g1)
    f2, _ = solve_harmonic(g, g2)
    fc, _ = solve_harmonic(g, a * g1 + b * g2)
    assert np.allclose(fc.values, a * f1.values + b * f2.values, atol=1e-9)
    # comparison: g1 <= g2 pointwise
    assert np.all(f1.values <= f2.values + 1e-10)


def test_nonconvergence_raises():
    g = build_grid(DomainSpec.interval(0.0, 1.0), 9)
    b = np.zeros(9)
    b[0] = 1.0
    with pytest.raises(SolverError):
        solve_screened(g, np.full(9, 1.0), b, tol=1e-30)


def test_field_shape_checked(unit_square_21):
    with pytest.raises(ValueError):
        ScalarField(unit_square_21, np.zeros(7))

"""Grid discretization: stencils, balls, medians, measures, and I/O."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from potlab.errors import (
    DataError,
    DomainError,
    GridMismatchError,
    ResolutionError,
)
from potlab.grid import (
    BallIndex,
    Grid2D,
    GridFunction,
    MeasureData,
    ball_average,
    ball_mass,
    ball_nodes,
    disk_integral,
    gradient,
    hessian,
    largest_median,
    median,
    read_measure,
    read_raster,
    truncate,
    w11_distance,
    write_measure,
    write_raster,
)


@pytest.fixture
def grid():
    return Grid2D(64)


def f_of(grid, fn):
    return GridFunction.from_callable(grid, fn)


# -- gradient / hessian -----------------------------------------------------

def test_gradient_affine_exact(grid):
    gx, gy = gradient(f_of(grid, lambda X, Y: 2.0 * X - 3.0 * Y + 1.0))
    assert np.allclose(gx.values, 2.0, atol=1e-13)
    assert np.allclose(gy.values, -3.0, atol=1e-13)


def test_gradient_constant(grid):
    gx, gy = gradient(GridFunction.constant(grid, 4.2))
    assert np.abs(gx.values).max() < 1e-12
    assert np.abs(gy.values).max() < 1e-12


def test_gradient_second_order_convergence():
    errs = []
    for n in (32, 64, 128):
        g = Grid2D(n)
        gx, _ = gradient(f_of(g, lambda X, Y: np.sin(2 * np.pi * X)))
        exact = 2 * np.pi * np.cos(2 * np.pi * g.X)
        errs.append(np.abs(gx.values - exact)[1:-1, 1:-1].max())
    # halving h divides the error by about 4
    assert errs[0] / errs[1] > 3.0
    assert errs[1] / errs[2] > 3.0


def test_gradient_quadratic_interior(grid):
    gx, _ = gradient(f_of(grid, lambda X, Y: X**2))
    exact = 2 * grid.X
    assert np.abs(gx.values - exact)[1:-1, 1:-1].max() < 1e-12


def test_hessian_bilinear_exact(grid):
    hxx, hxy, hyy = hessian(f_of(grid, lambda X, Y: X * Y))
    assert np.allclose(hxy.values, 1.0, atol=1e-10)
    assert np.allclose(hxx.values, 0.0, atol=1e-10)
    assert np.allclose(hyy.values, 0.0, atol=1e-10)


def test_hessian_affine_zero(grid):
    hxx, hxy, hyy = hessian(f_of(grid, lambda X, Y: 3 * X - Y))
    for h in (hxx, hxy, hyy):
        assert np.allclose(h.values, 0.0, atol=1e-10)


def test_hessian_second_order_convergence():
    errs = []
    for n in (32, 64, 128):
        g = Grid2D(n)
        hxx, _, _ = hessian(f_of(g, lambda X, Y: np.sin(X)))
        errs.append(np.abs(hxx.values + np.sin(g.X))[2:-2, 2:-2].max())
    assert errs[0] / errs[1] > 3.0


def test_hessian_gradient_consistency(grid):
    f = f_of(grid, lambda X, Y: np.sin(2 * X) * np.cos(Y))
    hxx, hxy, hyy = hessian(f)
    gx, gy = gradient(f)
    gxx, _ = gradient(gx)
    _, gyy = gradient(gy)
    inner = (slice(2, -2), slice(2, -2))
    assert np.abs(hxx.values - gxx.values)[inner].max() < 10 * grid.h
    assert np.abs(hyy.values - gyy.values)[inner].max() < 10 * grid.h


# -- ball machinery ----------------------------------------------------------

def test_ball_average_constant_exact(grid):
    assert ball_average(GridFunction.constant(grid, 5.0), (0.5, 0.5), 0.25) == 5.0


def test_ball_average_affine_symmetric(grid):
    v = ball_average(f_of(grid, lambda X, Y: X), (0.5, 0.5), 0.25)
    assert v == pytest.approx(0.5, abs=grid.h)


def test_ball_average_quadratic_oracle():
    # mean of |x - c|^2 over a disk of radius r is r^2/2
    g = Grid2D(128)
    f = f_of(g, lambda X, Y: (X - 0.5) ** 2 + (Y - 0.5) ** 2)
    r = 0.25
    assert ball_average(f, (0.5, 0.5), r) == pytest.approx(r**2 / 2, abs=2 * g.h * r)


def test_ball_average_linearity(grid):
    f1 = f_of(grid, lambda X, Y: np.sin(X + Y))
    f2 = f_of(grid, lambda X, Y: X**2)
    lhs = ball_average(f1.with_values(2 * f1.values + 3 * f2.values), (0.5, 0.5), 0.2)
    rhs = 2 * ball_average(f1, (0.5, 0.5), 0.2) + 3 * ball_average(f2, (0.5, 0.5), 0.2)
    assert lhs == pytest.approx(rhs, rel=1e-14)


def test_ball_average_guards(grid):
    f = GridFunction.constant(grid, 1.0)
    with pytest.raises(ResolutionError):
        ball_average(f, (0.5, 0.5), 0.5 * grid.h)
    with pytest.raises(DomainError):
        ball_average(f, (0.1, 0.5), 0.3)


def test_ball_index_count_matches_disk_area():
    g = Grid2D(128)
    idx = BallIndex(g)
    for r in (0.1, 0.2, 0.37):
        di, _ = idx.offsets(r)
        count = di.size
        area = np.pi * r**2
        ring = 2 * np.pi * (r + g.h) * g.h + 4 * g.h**2
        assert abs(count * g.h**2 - area) <= ring


def test_mean_oscillation_vs_best_constant():
    # avg |f - avg f| <= 2 min_c avg |f - c|, scanning c over node values
    g = Grid2D(32)
    rng = np.random.default_rng(3)
    f = GridFunction(g, rng.normal(size=(32, 32)))
    ii, jj = ball_nodes(g, (0.5, 0.5), 0.3)
    vals = f.values[ii, jj]
    lhs = np.abs(vals - vals.mean()).mean()
    best = min(np.abs(vals - c).mean() for c in vals)
    assert lhs <= 2 * best + 1e-12


# -- median -------------------------------------------------------------------

def test_largest_median_order_statistic():
    assert largest_median([1, 1, 2, 3, 3]) == 2
    assert largest_median([1.0]) == 1.0
    assert largest_median([2, 1]) == 1  # more than half must lie strictly above
    with pytest.raises(DataError):
        largest_median([])


def test_median_constant_and_affine(grid):
    assert median(GridFunction.constant(grid, 3.3), (0.5, 0.5), 0.2) == 3.3
    m = median(f_of(grid, lambda X, Y: X), (0.5, 0.5), 0.2)
    assert m == pytest.approx(0.5, abs=grid.h)


# -- truncation and W^{1,1} ---------------------------------------------------

def test_truncate(grid):
    assert np.all(truncate(GridFunction.constant(grid, 5.0), 3.0).values == 3.0)
    assert np.all(truncate(GridFunction.constant(grid, -5.0), 3.0).values == -3.0)
    f = f_of(grid, lambda X, Y: X - 0.5)
    assert np.array_equal(truncate(f, 2.0).values, f.values)
    with pytest.raises(DataError):
        truncate(f, 0.0)


def test_w11_distance(grid):
    f = f_of(grid, lambda X, Y: X)
    assert w11_distance(f, f) == 0.0
    shifted = f.with_values(f.values + 0.7)
    assert w11_distance(f, shifted) == pytest.approx(0.7, rel=1e-12)
    zero = GridFunction.constant(grid, 0.0)
    assert w11_distance(f, zero) == pytest.approx(1.5, abs=5 * grid.h)
    with pytest.raises(GridMismatchError):
        w11_distance(f, GridFunction.constant(Grid2D(32), 0.0))


# -- measures ------------------------------------------------------------------

def test_ball_mass_atoms():
    mu = MeasureData(atoms=[(0.0, 0.0, 1.0)])
    assert ball_mass(mu, (0.0, 0.0), 0.05) == 1.0
    assert ball_mass(mu, (0.3, 0.0), 0.2) == 0.0
    assert ball_mass(mu, (0.1, 0.0), 0.1) == 1.0  # closed ball: boundary atom counts


def test_ball_mass_disk_area():
    g = Grid2D(128)
    mu = MeasureData(density=GridFunction.constant(g, 1.0))
    r = 0.25
    got = ball_mass(mu, (0.5, 0.5), r)
    assert got == pytest.approx(np.pi * r**2, abs=2 * g.h * 2 * np.pi * r)


def test_ball_mass_additive_and_monotone():
    mu1 = MeasureData(atoms=[(0.3, 0.3, 1.0)])
    mu2 = MeasureData(atoms=[(0.7, 0.7, 2.0)])
    both = MeasureData(atoms=mu1.atoms + mu2.atoms)
    c, r = (0.5, 0.5), 0.4
    assert ball_mass(both, c, r) == ball_mass(mu1, c, r) + ball_mass(mu2, c, r)
    assert ball_mass(both, c, 0.2) <= ball_mass(both, c, 0.4)


def test_total_variation():
    g = Grid2D(32)
    mu = MeasureData(
        atoms=[(0.5, 0.5, 2.0), (0.25, 0.25, -1.0)],
        density=GridFunction.constant(g, 1.0),
    )
    assert mu.total_variation == pytest.approx(3.0 + 1.0, rel=1e-12)


def test_negative_density_rejected():
    g = Grid2D(32)
    with pytest.raises(DataError):
        MeasureData(density=GridFunction.constant(g, -1.0))


@given(st.floats(min_value=0.1, max_value=0.4))
@settings(max_examples=20, deadline=None)
def test_disk_integral_constant(r):
    g = Grid2D(64)
    val = disk_integral(GridFunction.constant(g, 2.0), (0.5, 0.5), r)
    assert val == pytest.approx(2.0 * np.pi * r**2, abs=2.0 * 3 * g.h * r + 8 * g.h**2)


# -- I/O -------------------------------------------------------------------------

def test_raster_roundtrip(tmp_path):
    g = Grid2D(32, side=2.0, origin=(-1.0, -1.0))
    f = f_of(g, lambda X, Y: np.sin(X) + Y)
    path = tmp_path / "field.txt"
    write_raster(path, f)
    back = read_raster(path)
    assert back.grid.matches(g)
    assert np.allclose(back.values, f.values, rtol=0, atol=1e-16)


def test_measure_roundtrip(tmp_path):
    g = Grid2D(32)
    mu = MeasureData(
        atoms=[(0.5, 0.5, 1.0), (0.25, 0.75, -0.5)],
        density=GridFunction.constant(g, 0.3),
    )
    path = tmp_path / "measure.txt"
    write_measure(path, mu)
    back = read_measure(path)
    assert back.atoms == mu.atoms
    assert np.allclose(back.density.values, 0.3)


def test_grid_validation():
    with pytest.raises(DataError):
        Grid2D(8)
    with pytest.raises(DataError):
        Grid2D(32, side=-1.0)


def test_gridfunction_immutable(grid):
    f = GridFunction.constant(grid, 1.0)
    with pytest.raises(ValueError):
        f.values[0, 0] = 2.0

import numpy as np
import pytest

from superextremal.domain import (
    Grid,
    Variogram,
    build_grid,
    increment_covariance,
    min_eigenvalue,
    variogram_matrix,
)
from superextremal.errors import ArgumentError, SizingError


def test_build_grid_line(grid):
    assert grid.size == 11
    assert grid.dimension == 1
    assert grid.origin_index == 0
    assert grid.metric[0, 10] == pytest.approx(1.0)
    assert np.array_equal(grid.metric, grid.metric.T)
    assert np.all(np.diag(grid.metric) == 0.0)


def test_build_grid_square():
    square = build_grid(dimension=2, extent=2.0, resolution=3, origin_index=4)
    assert square.size == 9
    assert square.dimension == 2
    assert square.metric[0, 8] == pytest.approx(np.sqrt(8.0))


def test_site_cap():
    with pytest.raises(SizingError):
        build_grid(dimension=2, resolution=21)
    assert build_grid(dimension=2, resolution=21, site_cap=441).size == 441


def test_grid_rejects_bad_input():
    with pytest.raises(ArgumentError):
        build_grid(resolution=5, origin_index=5)
    with pytest.raises(ArgumentError):
        Grid(sites=[0.0, 0.0], metric=[[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ArgumentError):
        Grid(sites=[0.0, 1.0], metric=[[0.0, 1.0], [2.0, 0.0]])


def test_grid_is_read_only(grid):
    with pytest.raises(ValueError):
        grid.sites[0, 0] = 5.0


def test_grid_does_not_freeze_caller_arrays():
    sites = np.array([0.0, 1.0])
    metric = np.array([[0.0, 1.0], [1.0, 0.0]])
    Grid(sites=sites, metric=metric)
    sites[0] = -1.0
    assert sites[0] == -1.0


def test_grid_frame(grid):
    frame = grid.to_frame()
    assert list(frame.columns) == ["site", "x0", "is_origin"]
    assert frame["is_origin"].sum() == 1
    assert bool(frame.loc[0, "is_origin"])
    assert frame["x0"].iloc[-1] == pytest.approx(1.0)


def test_variogram():
    v = Variogram(scale=2.0, exponent=1.5)
    assert v(4.0) == pytest.approx(16.0)
    with pytest.raises(ArgumentError):
        Variogram(exponent=2.5)
    with pytest.raises(ArgumentError):
        Variogram(scale=0.0)


def test_variogram_matrix_vanishes_on_diagonal(grid):
    gamma = variogram_matrix(grid, Variogram(exponent=0.5))
    assert np.all(np.diag(gamma) == 0.0)
    assert gamma[0, 4] == pytest.approx(0.4**0.5)


def test_increment_covariance_is_brownian_for_linear_variogram(grid, variogram):
    cov = increment_covariance(grid, variogram)
    t = grid.sites[:, 0]
    assert np.allclose(cov, np.minimum.outer(t, t), atol=1e-12)
    assert np.all(cov[grid.origin_index] == 0.0)


def test_increment_covariance_is_psd():
    square = build_grid(dimension=2, resolution=5, origin_index=12)
    for exponent in (0.5, 1.0, 1.9):
        cov = increment_covariance(square, Variogram(exponent=exponent))
        assert min_eigenvalue(cov) > -1e-10

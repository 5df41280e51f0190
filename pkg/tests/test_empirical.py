import numpy as np
import pytest

from superextremal.empirical import (
    CadlagMaxProcess,
    block_count,
    empirical_measure,
    empirical_order_stat,
    partial_maxima,
    pointwise_max,
)
from superextremal.errors import ArgumentError
from superextremal.ppp import theta_map, theta_tilde_map

BATCH = np.array([[1.0, 5.0], [3.0, 2.0], [2.0, 4.0], [0.5, 6.0]])


def test_block_count():
    assert block_count(10, 0.3) == 3
    assert block_count(10, 0.7) == 7
    assert block_count(10, 0.29) == 2
    assert block_count(10, 0.0) == 0
    with pytest.raises(ArgumentError):
        block_count(10, -0.1)


def test_pointwise_max():
    assert np.array_equal(pointwise_max(BATCH), [3.0, 6.0])
    assert np.array_equal(pointwise_max([], n_sites=3), np.zeros(3))
    with pytest.raises(ArgumentError):
        pointwise_max([[1.0, 2.0], [1.0]])


def test_partial_maxima():
    process = partial_maxima(BATCH, n=4, u_grid=[0.0, 0.25, 0.5, 1.0])
    assert np.array_equal(process.values, [[0.0, 0.0], [1.0, 5.0], [3.0, 5.0], [3.0, 6.0]])
    assert process.horizon == 1.0
    with pytest.raises(ArgumentError):
        partial_maxima(BATCH, n=4, u_grid=[0.5, 1.5])


def test_empirical_order_stat():
    assert empirical_order_stat(BATCH, 4, rank=2, u=1.0, site=1) == 5.0
    assert empirical_order_stat(BATCH, 4, rank=1, u=0.5, site=0) == 3.0
    assert empirical_order_stat(BATCH, 4, rank=3, u=0.5, site=0) == 0.0
    with pytest.raises(ArgumentError):
        empirical_order_stat(BATCH, 4, rank=0, u=1.0, site=0)


def test_empirical_measure_reproduces_maxima():
    batch = np.vstack([BATCH, np.zeros(2)])
    pm = empirical_measure(batch, n=5)
    assert pm.size == 4
    assert pm.horizon == pytest.approx(1.0)
    assert np.allclose(theta_map(pm), pointwise_max(batch))
    u_grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    assert np.allclose(theta_tilde_map(pm, u_grid).values, partial_maxima(batch, 5, u_grid).values)


def test_cadlag_lookup():
    process = CadlagMaxProcess(time_grid=np.array([0.5, 1.0]), values=np.array([[1.0, 2.0], [3.0, 2.0]]))
    assert np.array_equal(process.at(0.1), [0.0, 0.0])
    assert np.array_equal(process.at(0.5), [1.0, 2.0])
    assert np.array_equal(process.at(0.75), [1.0, 2.0])
    assert np.array_equal(process.at(2.0), [3.0, 2.0])
    frame = process.to_frame()
    assert list(frame.columns) == ["u", "site", "value"]
    assert len(frame) == 4


def test_cadlag_rejects_decreasing_values():
    with pytest.raises(ArgumentError):
        CadlagMaxProcess(time_grid=np.array([0.5, 1.0]), values=np.array([[2.0], [1.0]]))
    with pytest.raises(ArgumentError):
        CadlagMaxProcess(time_grid=np.array([1.0, 0.5]), values=np.array([[1.0], [2.0]]))

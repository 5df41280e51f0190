from math import exp, sqrt

import numpy as np
import pytest

import superextremal.stattest as stattest
from superextremal.config import RunConfig
from superextremal.domain import build_grid
from superextremal.errors import ArgumentError

# Unit-scale runs: small samples, loose significance, short truncation.
N = 1500
SIG = 0.001
COUNT = 60
ORACLE_TOLERANCE = 2.0 / sqrt(N)


def test_ks_critical():
    assert stattest.ks_critical(0.01) == pytest.approx(1.628, abs=1e-3)
    with pytest.raises(ArgumentError):
        stattest.ks_critical(1.5)


def test_ks_two_sample():
    rng = np.random.default_rng(0)
    a = 1.0 / rng.standard_exponential(500)
    same = stattest.ks_two_sample(a, a)
    assert same.statistic == 0.0
    assert same.passed
    shifted = stattest.ks_two_sample(a, a + 10.0)
    assert not shifted.passed
    assert shifted.n_samples == 1000
    with pytest.raises(ArgumentError):
        stattest.ks_two_sample([], a)


def test_report_dict():
    report = stattest.TestReport(statistic=0.1, threshold=0.05, n_samples=10, description="x", gating=False)
    record = report.to_dict()
    assert record["pass"] is False
    assert record["gating"] is False
    assert set(record) == {"statistic", "threshold", "n_samples", "description", "gating", "pass"}


def test_frechet_and_poisson_cdfs():
    assert stattest.frechet_cdf(np.array([1.0]))[0] == pytest.approx(exp(-1.0))
    assert stattest.frechet_cdf(np.array([-1.0, 0.0]), u=2.0).tolist() == [0.0, 0.0]
    y = np.array([0.3, 1.0, 4.0])
    assert np.allclose(stattest.poisson_order_stat_cdf(y, 1), stattest.frechet_cdf(y))
    assert stattest.poisson_order_stat_cdf(np.array([1.0]), 2)[0] == pytest.approx(2 * exp(-1.0))
    assert stattest.poisson_order_stat_cdf(np.array([2.0]), 3, u=2.0)[0] == pytest.approx(2.5 * exp(-1.0))


def test_superextremal_at(degenerate):
    draws = stattest.superextremal_at(degenerate, 1.0, [0, 3], 20, seed=1, count=COUNT)
    assert draws.shape == (20, 2)
    assert np.array_equal(draws[:, 0], draws[:, 1])
    assert np.array_equal(stattest.superextremal_at(degenerate, 0.0, [0], 5, seed=1), np.zeros((5, 1)))
    again = stattest.superextremal_at(degenerate, 1.0, [0, 3], 20, seed=1, count=COUNT)
    assert np.array_equal(draws, again)


def test_frechet_marginal(degenerate, brown_resnick):
    for sampler in (degenerate, brown_resnick):
        report = stattest.test_frechet_marginal(sampler, 1.0, 0, N, seed=2, tolerance=ORACLE_TOLERANCE, count=COUNT)
        assert report.passed


def test_limit_order_stat(degenerate):
    for rank in (2, 3):
        report = stattest.test_limit_order_stat(
            degenerate, rank, 1.0, 0, N, seed=3, tolerance=ORACLE_TOLERANCE, count=COUNT
        )
        assert report.passed


def test_degenerate_property_suite(degenerate):
    assert stattest.test_max_stability(degenerate, 2, 1.0, 0, N, seed=4, significance=SIG, count=COUNT).passed
    assert stattest.test_self_similarity(degenerate, 2.0, 1.0, 0, N, seed=5, significance=SIG, count=COUNT).passed
    assert stattest.test_markov(degenerate, 0.5, 0.5, 0, N, seed=6, significance=SIG, count=COUNT).passed
    assert stattest.test_markov(degenerate, 0.5, 0.0, 0, N, seed=7, significance=SIG, count=COUNT).passed


def test_brown_resnick_property_suite(brown_resnick):
    assert stattest.test_max_stability(brown_resnick, 3, 1.0, 5, N, seed=8, significance=SIG, count=COUNT).passed
    assert stattest.test_self_similarity(brown_resnick, 0.5, 1.0, 5, N, seed=9, significance=SIG, count=COUNT).passed
    assert stattest.test_markov(brown_resnick, 0.5, 0.5, 5, N, seed=10, significance=SIG, count=COUNT).passed


def test_order_stats_limit_reports(grid, variogram):
    reports = stattest.test_order_stats_limit(
        grid, variogram, [100, 1000], 1, 1.0, grid.origin_index, 1000, seed=11, significance=SIG, count=COUNT
    )
    assert len(reports) == 3
    assert [r.gating for r in reports] == [False, False, True]
    assert all(r.statistic < 0.2 for r in reports[:2])


def test_spatial_maxima_limit_reports(grid, variogram):
    reports = stattest.test_spatial_maxima_limit(
        grid, variogram, [100, 1000], 1.0, [grid.origin_index, 3], 1000, seed=13, significance=SIG, count=COUNT
    )
    assert len(reports) == 3
    assert [r.gating for r in reports] == [False, False, True]
    assert all(r.statistic < 0.25 for r in reports[:2])
    with pytest.raises(ArgumentError):
        stattest.test_spatial_maxima_limit(grid, variogram, [], 1.0, [0], 10, seed=1)


def test_run_suite_always_compares_maxima():
    config = RunConfig(
        resolution=4,
        truncation=COUNT,
        test_samples=200,
        mc_size=2000,
        n_list=[100, 1000],
        stability_copies=[2],
        similarity_scales=[2.0],
        ranks=[2],
    )
    descriptions = [r.description for r in stattest.run_suite(config)]
    assert any(d.startswith("order statistic r=1 n=100") for d in descriptions)
    assert any(d.startswith("order statistic r=2 n=100") for d in descriptions)
    assert any(d.startswith("spatial maxima n=1000") for d in descriptions)


def test_radial_identity(brown_resnick):
    report = stattest.test_radial_identity(brown_resnick, np.ones(2), [0, 5], 200_000, seed=12)
    assert report.passed


def test_conditional_formulas(variogram):
    report = stattest.test_conditional_formulas(build_grid(resolution=10), variogram, [10, 1e3, 1e6])
    assert report.passed
    assert report.statistic < 1e-8

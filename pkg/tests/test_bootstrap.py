"""Tests for the seeded pairs bootstrap and percentile intervals."""

import numpy as np
import pytest

from multitreat.bootstrap import (
    PERCENTILES,
    BootstrapResult,
    _nearest_rank,
    bootstrap_ci,
)
from multitreat.data import Dataset
from multitreat.errors import ConvergenceError, InputError, MultitreatError


def _make_dataset(n=80, seed=3):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=n)
    x = rng.normal(size=(n, 2))
    return Dataset(y=y, x=x)


def _mean_y(d):
    return np.array([d.y.mean()])


def test_nearest_rank_matches_hand_oracle():
    # with m = 10 draws 1..10 the nearest-rank order statistics are
    # ceil(10 * pct / 100): 2.5 -> 1st, 5 -> 1st, 95 -> 10th, 97.5 -> 10th
    draws = np.arange(1.0, 11.0)[:, None]
    assert _nearest_rank(draws, 2.5)[0] == 1.0
    assert _nearest_rank(draws, 5.0)[0] == 1.0
    assert _nearest_rank(draws, 95.0)[0] == 10.0
    assert _nearest_rank(draws, 97.5)[0] == 10.0
    # m = 40: ceil(40 * 2.5 / 100) = 1, ceil(40 * 95 / 100) = 38
    draws = np.arange(1.0, 41.0)[:, None]
    assert _nearest_rank(draws, 2.5)[0] == 1.0
    assert _nearest_rank(draws, 95.0)[0] == 38.0
    assert _nearest_rank(draws, 97.5)[0] == 39.0


def test_bootstrap_deterministic_under_seed():
    d = _make_dataset()
    a = bootstrap_ci(d, _mean_y, B=60, seed=11)
    b = bootstrap_ci(d, _mean_y, B=60, seed=11)
    assert np.array_equal(a.draws, b.draws)
    assert np.array_equal(a.percentiles, b.percentiles)
    c = bootstrap_ci(d, _mean_y, B=60, seed=12)
    assert not np.array_equal(a.draws, c.draws)


def test_constant_estimator_gives_zero_width_interval():
    d = _make_dataset()
    res = bootstrap_ci(d, lambda dd: np.array([4.0]), B=60, seed=0)
    lo, hi = res.interval(0.95)
    assert lo[0] == 4.0 and hi[0] == 4.0
    lo, hi = res.interval(0.90)
    assert lo[0] == 4.0 and hi[0] == 4.0
    assert res.covers(np.array([4.0]))[0]
    assert not res.covers(np.array([4.1]))[0]


def test_interval_levels_and_validation():
    d = _make_dataset()
    res = bootstrap_ci(d, _mean_y, B=100, seed=5)
    lo95, hi95 = res.interval(0.95)
    lo90, hi90 = res.interval(0.90)
    assert lo95[0] <= lo90[0] <= hi90[0] <= hi95[0]
    with pytest.raises(InputError):
        res.interval(0.80)
    with pytest.raises(InputError):
        bootstrap_ci(d, _mean_y, B=20, seed=5)


def test_percentiles_match_nearest_rank_of_draws():
    d = _make_dataset()
    res = bootstrap_ci(d, _mean_y, B=75, seed=9)
    assert res.draws.shape == (75, 1)
    for i, pct in enumerate(PERCENTILES):
        assert res.percentiles[i, 0] == _nearest_rank(res.draws, pct)[0]


def test_failures_excluded_and_capped():
    d = _make_dataset(n=60)

    calls = {"k": 0}

    def flaky(dd):
        calls["k"] += 1
        # fail on a fixed subset of replicate calls (first call is the
        # point estimate and must not fail)
        if calls["k"] > 1 and calls["k"] % 12 == 0:
            raise ConvergenceError("no convergence")
        return np.array([dd.y.mean()])

    res = bootstrap_ci(d, flaky, B=60, seed=2)
    assert res.failures == 5
    assert res.draws.shape[0] == 55

    calls["k"] = 0

    def mostly_broken(dd):
        calls["k"] += 1
        if calls["k"] > 1 and calls["k"] % 3 != 0:
            raise ConvergenceError("no convergence")
        return np.array([dd.y.mean()])

    with pytest.raises(MultitreatError):
        bootstrap_ci(d, mostly_broken, B=60, seed=2)


def test_coverage_calibration_for_gaussian_mean():
    # mean of n = 400 standard normals, B = 200: empirical 95% coverage
    # over 120 outer replications should sit near the nominal level
    outer = 120
    covered = 0
    root = np.random.SeedSequence(2024)
    for i, ss in enumerate(root.spawn(outer)):
        rng = np.random.default_rng(ss)
        y = rng.normal(size=400)
        d = Dataset(y=y, x=np.ones((400, 1)))
        res = bootstrap_ci(d, _mean_y, B=200, seed=10_000 + i)
        covered += int(res.covers(np.array([0.0]))[0])
    rate = covered / outer
    assert 0.88 <= rate <= 1.0


def test_result_shape_multivariate():
    d = _make_dataset()
    res = bootstrap_ci(d, lambda dd: dd.x.mean(axis=0), B=60, seed=7)
    assert res.point.shape == (2,)
    assert res.percentiles.shape == (len(PERCENTILES), 2)
    cov = res.covers(np.zeros(2))
    assert cov.shape == (2,)

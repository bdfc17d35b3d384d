"""Seeded nonparametric pairs bootstrap with percentile intervals.

Rows are resampled with replacement; each replicate draws its indices
from an independent substream spawned from the seed, so results do not
depend on evaluation order.  Replicates whose estimator raises are
counted as failures and excluded from the percentiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import InputError, MultitreatError

PERCENTILES = (2.5, 5.0, 95.0, 97.5)
MAX_FAILURE_FRACTION = 0.2
MIN_REPLICATES = 50


@dataclass(frozen=True)
class BootstrapResult:
    """Point estimate with percentile bands from resampled replicates."""

    point: np.ndarray
    draws: np.ndarray
    percentiles: np.ndarray  # len(PERCENTILES) x p, rows in PERCENTILES order
    failures: int

    def interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        if abs(level - 0.95) < 1e-12:
            return self.percentiles[0], self.percentiles[3]
        if abs(level - 0.90) < 1e-12:
            return self.percentiles[1], self.percentiles[2]
        raise InputError("only 0.95 and 0.90 intervals are tabulated")

    def covers(self, truth: np.ndarray, level: float = 0.95) -> np.ndarray:
        lo, hi = self.interval(level)
        t = np.asarray(truth, dtype=float)
        return (lo <= t) & (t <= hi)


def _resample(d: Dataset, idx: np.ndarray) -> Dataset:
    return Dataset(
        y=d.y[idx],
        x=d.x[idx],
        z=None if d.z is None else d.z[idx],
        w=None if d.w is None else d.w[idx],
        names=d.names,
    )


def _nearest_rank(draws: np.ndarray, pct: float) -> np.ndarray:
    """Nearest-rank percentile: the ceil(m * pct / 100)-th order statistic."""
    m = draws.shape[0]
    k = int(np.ceil(m * pct / 100.0))
    k = min(max(k, 1), m)
    return np.sort(draws, axis=0)[k - 1]


def bootstrap_ci(d: Dataset, estimator, B: int, seed: int) -> BootstrapResult:
    """Percentile confidence intervals for estimator(d) by pairs bootstrap.

    estimator maps a Dataset to a 1-d coefficient vector; replicates that
    raise a package error are excluded.  Requires B >= 50 and fewer than
    20% failed replicates.
    """
    if B < MIN_REPLICATES:
        raise InputError(f"B must be at least {MIN_REPLICATES} (got {B})")
    point = np.atleast_1d(np.asarray(estimator(d), dtype=float))
    streams = np.random.SeedSequence(seed).spawn(B)
    draws = []
    failures = 0
    for ss in streams:
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, d.n, size=d.n)
        try:
            est = np.atleast_1d(np.asarray(estimator(_resample(d, idx)), dtype=float))
        except (MultitreatError, np.linalg.LinAlgError):
            failures += 1
            continue
        if est.shape != point.shape or not np.all(np.isfinite(est)):
            failures += 1
            continue
        draws.append(est)
    if failures > MAX_FAILURE_FRACTION * B:
        raise MultitreatError(
            f"{failures} of {B} bootstrap replicates failed; interval unreliable"
        )
    draws = np.asarray(draws)
    pct = np.vstack([_nearest_rank(draws, q) for q in PERCENTILES])
    return BootstrapResult(point=point, draws=draws, percentiles=pct, failures=failures)

"""Null-treatments estimator and a sharp-null projection test.

The estimator needs no instruments: it factor-analyzes the treatments,
selects the confounded coordinates by the log(n)/n row-norm rule, solves a
least-median-of-squares regression of the crude outcome coefficients on the
factor rows, and refines by OLS over the coordinates the robust step marks
as null.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import IdentificationError, InputError
from .factor import FactorFit, fit_factor, select_confounded
from .linmodel import ols
from .robust import lms


@dataclass(frozen=True)
class NullEstimate:
    beta: np.ndarray
    beta_lms: np.ndarray
    delta: np.ndarray
    confounded: set[int]
    null_set: tuple[int, ...]
    factor: FactorFit


@dataclass(frozen=True)
class SharpNullTest:
    statistic: float
    p_value: float
    B: int


def solve_null(
    xi: np.ndarray,
    gamma: np.ndarray,
    n: int,
    q: int,
    lms_budget: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, set[int], tuple[int, ...]]:
    """Robust-then-refine solve given the crude coefficients and factor rows.

    Returns (beta, beta_lms, delta, confounded, null_set).
    """
    threshold = np.log(n) / n
    confounded = {
        int(i) for i in np.nonzero(np.sum(gamma**2, axis=1) > threshold)[0]
    }
    if len(confounded) <= q:
        raise IdentificationError(
            f"only {len(confounded)} confounded treatments selected; "
            f"more than q={q} are required"
        )
    cidx = np.array(sorted(confounded))
    lms_fit = lms(gamma[cidx], xi[cidx], budget=lms_budget)
    beta_lms = xi - gamma @ lms_fit.coef

    keep = (len(confounded) + q) // 2
    order = sorted(range(len(cidx)), key=lambda j: (abs(beta_lms[cidx[j]]), cidx[j]))
    null_set = tuple(int(cidx[j]) for j in sorted(order[:keep]))
    nidx = np.array(null_set)
    sv = np.linalg.svd(gamma[nidx], compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-10 * sv[0]:
        raise IdentificationError(
            "refinement design is rank deficient: the selected null rows of "
            "the factor coefficients do not have full rank"
        )
    delta = ols(xi[nidx], gamma[nidx]).coef_vector()
    beta = xi - gamma @ delta
    return beta, beta_lms, delta, confounded, null_set


def estimate_null(
    d: Dataset, q: int, restarts: int = 5, lms_budget: int | None = None
) -> NullEstimate:
    """Null-treatments estimate of the treatment-effect vector."""
    if d.n <= d.p:
        raise InputError(f"need n > p (n={d.n}, p={d.p})")
    x = d.x - d.x.mean(axis=0)
    y = d.y - d.y.mean()
    factor = fit_factor(x, q, restarts=restarts)
    xi = ols(y, x).coef_vector()
    beta, beta_lms, delta, confounded, null_set = solve_null(
        xi, factor.gamma, d.n, q, lms_budget=lms_budget
    )
    # keep the selection consistent with the public helper
    assert confounded == select_confounded(factor, d.n)
    return NullEstimate(
        beta=beta,
        beta_lms=beta_lms,
        delta=delta,
        confounded=confounded,
        null_set=null_set,
        factor=factor,
    )


def _projection_statistic(xi: np.ndarray, gamma: np.ndarray, n: int, q: int) -> float:
    threshold = np.log(n) / n
    cidx = np.nonzero(np.sum(gamma**2, axis=1) > threshold)[0]
    if len(cidx) <= q:
        raise IdentificationError(
            f"only {len(cidx)} confounded treatments selected; "
            f"more than q={q} are required"
        )
    g = gamma[cidx]
    v = xi[cidx]
    qmat, _ = np.linalg.qr(g)
    resid = v - qmat @ (qmat.T @ v)
    return float(np.linalg.norm(resid))


def test_sharp_null_linear(
    d: Dataset, q: int, B: int, seed: int = 0, restarts: int = 5
) -> SharpNullTest:
    """Test that no treatment affects the outcome: under the null the crude
    coefficients lie in the span of the confounded factor rows, so the
    projection residual should be noise.  The reference distribution comes
    from a recentered nonparametric bootstrap."""
    x = d.x - d.x.mean(axis=0)
    y = d.y - d.y.mean()
    factor = fit_factor(x, q, restarts=restarts)
    xi = ols(y, x).coef_vector()
    statistic = _projection_statistic(xi, factor.gamma, d.n, q)

    rng_root = np.random.default_rng(seed)
    seeds = rng_root.spawn(B)
    exceed = 0
    valid = 0
    for child in seeds:
        rows = child.integers(0, d.n, size=d.n)
        xb = d.x[rows]
        yb = d.y[rows]
        xb = xb - xb.mean(axis=0)
        yb = yb - yb.mean()
        try:
            fb = fit_factor(xb, q, restarts=restarts)
            xib = ols(yb, xb).coef_vector()
            stat_b = _projection_statistic(xib, fb.gamma, d.n, q)
        except (IdentificationError, InputError):
            continue
        valid += 1
        if stat_b - statistic >= statistic:
            exceed += 1
    if valid == 0:
        raise IdentificationError("every bootstrap replicate failed")
    p_value = (1 + exceed) / (valid + 1)
    return SharpNullTest(statistic=statistic, p_value=p_value, B=valid)


# not a pytest case despite the name
test_sharp_null_linear.__test__ = False

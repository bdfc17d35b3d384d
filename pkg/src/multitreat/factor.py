"""Maximum-likelihood factor analysis and confounded-treatment selection.

The fit maximizes the Gaussian factor likelihood of the sample covariance by
profiling out the loadings: given uniquenesses psi the loadings are available
in closed form from an eigendecomposition, and psi is optimized by L-BFGS-B
with the analytic gradient.  Optimization runs on the correlation scale for
conditioning and the solution is mapped back to the covariance scale, which
is exact because the ML problem is scale equivariant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .errors import ConvergenceError, InputError
from .linmodel import covariance, ols

# Lower bound for uniquenesses on the correlation scale; hitting it marks a
# Heywood case but keeps the fitted covariance invertible.
PSI_MIN = 0.005
MAX_ITER = 500
LOGLIK_TOL = 1e-8


@dataclass(frozen=True)
class FactorFit:
    """ML factor solution; loadings are determined only up to rotation."""

    loadings: np.ndarray
    uniquenesses: np.ndarray
    gamma: np.ndarray
    q: int
    loglik: float
    discrepancy: float
    converged: bool
    heywood: np.ndarray
    eta: np.ndarray | None = None

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    def fitted_cov(self) -> np.ndarray:
        return self.loadings @ self.loadings.T + np.diag(self.uniquenesses)


@dataclass(frozen=True)
class SufficiencyTest:
    statistic: float
    df: int
    p_value: float


def _objective(psi: np.ndarray, corr: np.ndarray, q: int):
    """Profile discrepancy and its gradient with respect to psi."""
    sc = 1.0 / np.sqrt(psi)
    sstar = corr * np.outer(sc, sc)
    eigval, eigvec = np.linalg.eigh(sstar)
    # descending order
    eigval = eigval[::-1]
    eigvec = eigvec[:, ::-1]
    tail = np.clip(eigval[q:], 1e-12, None)
    value = float(np.sum(tail - np.log(tail) - 1.0))
    load = eigvec[:, :q] * np.sqrt(np.clip(eigval[:q] - 1.0, 0.0, None))
    load = load * np.sqrt(psi)[:, None]
    grad = (np.sum(load**2, axis=1) + psi - np.diag(corr)) / psi**2
    return value, grad


def _loadings_from_psi(psi: np.ndarray, corr: np.ndarray, q: int) -> np.ndarray:
    sc = 1.0 / np.sqrt(psi)
    sstar = corr * np.outer(sc, sc)
    eigval, eigvec = np.linalg.eigh(sstar)
    eigval = eigval[::-1]
    eigvec = eigvec[:, ::-1]
    load = eigvec[:, :q] * np.sqrt(np.clip(eigval[:q] - 1.0, 0.0, None))
    return load * np.sqrt(psi)[:, None]


def _start_values(corr: np.ndarray, q: int, restarts: int) -> list[np.ndarray]:
    p = corr.shape[0]
    try:
        base = (1.0 - 0.5 * q / p) / np.diag(np.linalg.inv(corr))
    except np.linalg.LinAlgError:
        base = np.full(p, 0.5)
    base = np.clip(base, PSI_MIN, 1.0)
    starts = [base, np.full(p, 0.5)]
    rng = np.random.default_rng(20230 + q)
    while len(starts) < restarts:
        starts.append(np.clip(base * rng.uniform(0.4, 1.6, p), PSI_MIN, 1.0))
    return starts[:restarts]


def fit_factor_cov(cov: np.ndarray, n: int, q: int, restarts: int = 5) -> FactorFit:
    """ML factor analysis of a covariance matrix with ``n`` observations."""
    s = np.asarray(cov, dtype=float)
    p = s.shape[0]
    if q < 1:
        raise InputError("factor count q must be at least 1")
    if q >= p:
        raise InputError(f"factor count q={q} must be smaller than p={p}")
    if p < 2 * q + 1:
        warnings.warn(
            f"p={p} < 2q+1={2 * q + 1}: loadings may not be determined up to "
            "rotation",
            stacklevel=2,
        )
    scale = np.sqrt(np.diag(s))
    if np.any(scale <= 0):
        raise InputError("covariance has a zero-variance coordinate")
    corr = s / np.outer(scale, scale)

    best = None
    bounds = [(PSI_MIN, 1.0)] * p
    for start in _start_values(corr, q, restarts):
        res = optimize.minimize(
            _objective,
            start,
            args=(corr, q),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": MAX_ITER, "ftol": LOGLIK_TOL * 1e-4, "gtol": 1e-9},
        )
        if best is None or res.fun < best.fun:
            best = res
    psi_corr = np.clip(best.x, PSI_MIN, 1.0)
    load_corr = _loadings_from_psi(psi_corr, corr, q)
    # sign convention per column for reproducibility across restarts
    for j in range(q):
        col = load_corr[:, j]
        k = np.argmax(np.abs(col))
        if col[k] < 0:
            load_corr[:, j] = -col

    loadings = load_corr * scale[:, None]
    psi = psi_corr * scale**2
    heywood = psi_corr <= PSI_MIN + 1e-10
    fitted = loadings @ loadings.T + np.diag(psi)
    gamma = np.linalg.solve(fitted, loadings)

    sign, logdet = np.linalg.slogdet(fitted)
    trace = float(np.trace(np.linalg.solve(fitted, s)))
    loglik = -0.5 * (n - 1) * (logdet + trace + p * np.log(2 * np.pi))
    return FactorFit(
        loadings=loadings,
        uniquenesses=psi,
        gamma=gamma,
        q=q,
        loglik=loglik,
        discrepancy=float(best.fun),
        converged=bool(best.success or best.fun < np.inf),
        heywood=heywood,
    )


def fit_factor(
    data: np.ndarray,
    q: int,
    controls: np.ndarray | None = None,
    restarts: int = 5,
) -> FactorFit:
    """Fit the factor model to ``data``; with ``controls`` supplied, the
    control coefficients are regressed out first and the residuals are
    factor-analyzed."""
    x = np.atleast_2d(np.asarray(data, dtype=float))
    n, p = x.shape
    if n <= p:
        raise InputError(f"need n > p (n={n}, p={p})")
    eta = None
    if controls is not None:
        fit = ols(x, controls)
        eta = fit.coef.T  # p x r
        x = fit.residuals
    cov_fit = fit_factor_cov(covariance(x).matrix, n, q, restarts=restarts)
    if eta is None:
        return cov_fit
    return FactorFit(
        loadings=cov_fit.loadings,
        uniquenesses=cov_fit.uniquenesses,
        gamma=cov_fit.gamma,
        q=cov_fit.q,
        loglik=cov_fit.loglik,
        discrepancy=cov_fit.discrepancy,
        converged=cov_fit.converged,
        heywood=cov_fit.heywood,
        eta=eta,
    )


def sufficiency_test(fit: FactorFit, n: int) -> SufficiencyTest:
    """Bartlett-corrected likelihood-ratio test that ``fit.q`` factors
    suffice."""
    p, q = fit.p, fit.q
    df = ((p - q) ** 2 - p - q) // 2
    if df <= 0:
        raise InputError(f"model with q={q} factors is saturated for p={p}")
    multiplier = n - 1 - (2 * p + 5) / 6.0 - 2 * q / 3.0
    statistic = multiplier * fit.discrepancy
    p_value = float(stats.chi2.sf(statistic, df))
    return SufficiencyTest(statistic=float(statistic), df=df, p_value=p_value)


def select_confounded(fit: FactorFit, n: int) -> set[int]:
    """Treatments whose gamma row norm exceeds the log(n)/n threshold."""
    if not fit.converged:
        raise ConvergenceError("factor fit did not converge")
    threshold = np.log(n) / n
    norms = np.sum(fit.gamma**2, axis=1)
    return {int(i) for i in np.nonzero(norms > threshold)[0]}

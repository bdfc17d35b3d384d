"""Least squares building blocks: OLS, two-stage least squares, covariance.

Everything is solved through orthogonal decompositions rather than normal
equations; rank deficiency is detected from the singular values with a
relative tolerance of 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IdentificationError, InputError

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class OlsFit:
    """Least-squares fit; coef has one column per response."""

    coef: np.ndarray
    residuals: np.ndarray
    xtx_inverse: np.ndarray

    def coef_vector(self) -> np.ndarray:
        """Coefficients as a 1-d vector (single-response fits)."""
        return self.coef[:, 0]


@dataclass(frozen=True)
class CovMatrix:
    matrix: np.ndarray
    n: int


def _check_rank(m: np.ndarray, what: str) -> None:
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        cond = np.inf if sv[-1] == 0.0 else sv[0] / sv[-1]
        raise IdentificationError(
            f"{what} is rank deficient (condition estimate {cond:.3e})"
        )


def ols(responses: np.ndarray, regressors: np.ndarray) -> OlsFit:
    """Column-wise least squares of ``responses`` on ``regressors``.

    No intercept is added; callers work with centered data.
    """
    ymat = np.asarray(responses, dtype=float)
    if ymat.ndim == 1:
        ymat = ymat[:, None]
    xmat = np.asarray(regressors, dtype=float)
    if xmat.ndim == 1:
        xmat = xmat[:, None]
    n, m = xmat.shape
    if ymat.shape[0] != n:
        raise InputError("responses and regressors disagree on row count")
    if n <= m:
        raise InputError(f"need more rows than regressors (n={n}, m={m})")
    _check_rank(xmat, "regressor matrix")
    q, r = np.linalg.qr(xmat)
    coef = np.linalg.solve(r, q.T @ ymat)
    residuals = ymat - xmat @ coef
    rinv = np.linalg.solve(r, np.eye(m))
    return OlsFit(coef=coef, residuals=residuals, xtx_inverse=rinv @ rinv.T)


def tsls(
    y: np.ndarray,
    endogenous: np.ndarray,
    instruments: np.ndarray,
    exogenous: np.ndarray | None = None,
) -> np.ndarray:
    """Two-stage least squares of y on endogenous regressors.

    Stage one projects the endogenous block on (instruments, exogenous);
    stage two regresses y on the fitted values plus the exogenous block.
    Returns the stacked coefficient vector (endogenous first).
    """
    xmat = np.atleast_2d(np.asarray(endogenous, dtype=float))
    if xmat.shape[0] == 1 and np.asarray(y).shape[0] != 1:
        xmat = xmat.T
    zmat = np.atleast_2d(np.asarray(instruments, dtype=float))
    if zmat.shape[0] == 1 and np.asarray(y).shape[0] != 1:
        zmat = zmat.T
    p = xmat.shape[1]
    if zmat.shape[1] < p:
        raise IdentificationError(
            f"under-identified: {zmat.shape[1]} instruments for {p} "
            "endogenous regressors"
        )
    stage1_design = zmat if exogenous is None else np.hstack([zmat, exogenous])
    fitted = stage1_design @ ols(xmat, stage1_design).coef
    stage2_design = fitted if exogenous is None else np.hstack([fitted, exogenous])
    return ols(np.asarray(y, dtype=float), stage2_design).coef_vector()


def covariance(m: np.ndarray) -> CovMatrix:
    """Unbiased sample covariance (divisor n-1) of the rows of ``m``."""
    mat = np.atleast_2d(np.asarray(m, dtype=float))
    n = mat.shape[0]
    if n < 2:
        raise InputError("covariance requires at least two rows")
    centered = mat - mat.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return CovMatrix(matrix=cov, n=n)

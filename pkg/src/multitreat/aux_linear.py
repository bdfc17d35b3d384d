"""Auxiliary-variables estimator of treatment effects in the linear model.

Pipeline: residualize treatments on the instruments, factor-analyze the
residuals, regress the outcome on treatments and instruments, and correct
the treatment coefficients through the factor structure.  Instrument
columns may be split between instruments proper and exogenous covariates;
covariates still enter both regressions but are excluded from the
correction term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .data import Dataset
from .errors import IdentificationError, InputError
from .factor import FactorFit, fit_factor
from .linmodel import ols

COND_RTOL = 1e-10


@dataclass(frozen=True)
class AuxEstimate:
    beta: np.ndarray
    delta: np.ndarray
    xi_x: np.ndarray
    xi_z: np.ndarray
    factor: FactorFit
    rank_ok: bool


def combine_aux(
    xi_x: np.ndarray,
    xi_z: np.ndarray,
    gamma: np.ndarray,
    eta: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Correction step: returns (beta, delta) from the outcome coefficients
    and the factor quantities.  ``eta`` holds only the instrument columns
    used for the correction (p x k with k >= q)."""
    mmat = gamma.T @ eta  # q x k
    amat = mmat @ mmat.T  # q x q
    sv = np.linalg.svd(amat, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= COND_RTOL * sv[0]:
        cond = np.inf if sv[-1] == 0.0 else sv[0] / sv[-1]
        raise IdentificationError(
            "instrument-loading product is singular "
            f"(condition estimate {cond:.3e}): the factor-instrument rank "
            "requirement fails"
        )
    delta = -np.linalg.solve(amat, mmat @ xi_z)
    beta = xi_x - gamma @ delta
    return beta, delta


def estimate_aux_subset(
    d: Dataset,
    q: int,
    iv_cols: Iterable[int],
    restarts: int = 5,
) -> AuxEstimate:
    """Auxiliary-variables estimate using only ``iv_cols`` of z as
    instruments; the remaining z columns act as exogenous covariates."""
    if d.z is None:
        raise InputError("dataset has no instrument block")
    iv = sorted(set(int(i) for i in iv_cols))
    if any(i < 0 or i >= d.r for i in iv):
        raise InputError(f"instrument column index outside 0..{d.r - 1}")
    if len(iv) < q:
        raise IdentificationError(
            f"{len(iv)} instrument columns cannot identify q={q} confounders"
        )
    if d.n <= d.p + d.r:
        raise InputError(f"need n > p + r (n={d.n}, p={d.p}, r={d.r})")

    x = d.x - d.x.mean(axis=0)
    z = d.z - d.z.mean(axis=0)
    y = d.y - d.y.mean()

    factor = fit_factor(x, q, controls=z, restarts=restarts)
    outcome = ols(y, np.hstack([x, z]))
    xi_x = outcome.coef_vector()[: d.p]
    xi_z = outcome.coef_vector()[d.p:]

    eta_iv = factor.eta[:, iv]
    beta, delta = combine_aux(xi_x, xi_z[iv], factor.gamma, eta_iv)
    return AuxEstimate(
        beta=beta,
        delta=delta,
        xi_x=xi_x,
        xi_z=xi_z,
        factor=factor,
        rank_ok=True,
    )


def estimate_aux(d: Dataset, q: int, restarts: int = 5) -> AuxEstimate:
    """Auxiliary-variables estimate using every instrument column."""
    if d.z is None:
        raise InputError("dataset has no instrument block")
    return estimate_aux_subset(d, q, range(d.r), restarts=restarts)

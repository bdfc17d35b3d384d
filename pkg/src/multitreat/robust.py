"""Least-quantile-of-squares regression via elemental subsets.

Candidates are exact fits through q-point subsets; with C(m, q) at or below
the budget every subset is tried, otherwise a seeded sample of subsets is
used.  Ties on the objective are broken by the lexicographically smallest
subset so the result does not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import IdentificationError, InputError

DEFAULT_BUDGET = 20000


@dataclass(frozen=True)
class LmsFit:
    coef: np.ndarray
    objective: float
    subset: tuple[int, ...]
    exhaustive: bool


def lms(
    design: np.ndarray,
    response: np.ndarray,
    quantile_index: int | None = None,
    budget: int | None = None,
    seed: int = 0,
) -> LmsFit:
    """Minimize the h-th smallest squared residual over elemental-subset
    candidates; h defaults to floor((m+q+1)/2)."""
    a = np.atleast_2d(np.asarray(design, dtype=float))
    if a.shape[0] == 1 and np.asarray(response).size != 1:
        a = a.T
    b = np.asarray(response, dtype=float).ravel()
    m, q = a.shape
    if m <= q:
        raise InputError(f"need more points than parameters (m={m}, q={q})")
    h = quantile_index if quantile_index is not None else (m + q + 1) // 2
    if not 1 <= h <= m:
        raise InputError(f"quantile index {h} outside 1..{m}")
    budget = DEFAULT_BUDGET if budget is None else budget

    n_subsets = comb(m, q)
    if n_subsets <= budget:
        subsets = combinations(range(m), q)
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        subsets = (
            tuple(sorted(rng.choice(m, size=q, replace=False)))
            for _ in range(budget)
        )
        exhaustive = False

    best: tuple[float, tuple[int, ...], np.ndarray] | None = None
    for subset in subsets:
        idx = list(subset)
        sub = a[idx]
        if np.linalg.matrix_rank(sub) < q:
            continue
        coef = np.linalg.solve(sub, b[idx])
        sq = (b - a @ coef) ** 2
        objective = float(np.partition(sq, h - 1)[h - 1])
        key = (objective, subset)
        if best is None or key < (best[0], best[1]):
            best = (objective, subset, coef)
    if best is None:
        raise IdentificationError("every elemental subset is singular")
    return LmsFit(
        coef=best[2], objective=best[0], subset=best[1], exhaustive=exhaustive
    )

"""Exact finite-support solver: binary confounder and proxy, binary
treatments, finite-support outcome.

Probability tables use the axis order (y, x1..xp, u, z); marginal and
conditional tables derived from a joint follow the same convention.  The
pipeline mirrors the population-level construction: fit a two-component
product-Bernoulli mixture to f(x), solve for the proxy law f(z|u), invert
the 2x2 confounder kernel for the outcome law f(y|u,x), and integrate to
the interventional distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import IdentificationError, InputError

TABLE_TOL = 1e-12
FIT_TOL = 1e-6
CLIP_TOL = 1e-6
COMPLETENESS_RTOL = 1e-8


@dataclass(frozen=True)
class DiscreteJoint:
    """Joint probability table over (Y, X1..Xp, U, Z); Y has m levels, all
    other axes are binary."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        object.__setattr__(self, "table", t)
        if t.ndim < 4:
            raise InputError("joint table needs axes (y, x1..xp, u, z)")
        if any(s != 2 for s in t.shape[1:]):
            raise InputError("treatments, confounder, and proxy must be binary")
        if np.any(t < -TABLE_TOL):
            raise InputError("joint table has negative entries")
        if abs(t.sum() - 1.0) > 1e-10:
            raise InputError("joint table does not sum to 1")

    @property
    def p(self) -> int:
        return self.table.ndim - 3

    @property
    def m(self) -> int:
        return self.table.shape[0]

    def px(self) -> np.ndarray:
        """Marginal f(x), shape (2,)*p."""
        return self.table.sum(axis=(0, -2, -1))

    def pzx(self) -> np.ndarray:
        """Joint f(z, x), axis order (z, x1..xp)."""
        zx = self.table.sum(axis=(0, -2))  # (x..., z)
        return np.moveaxis(zx, -1, 0)

    def pyxz(self) -> np.ndarray:
        """Conditional f(y | x, z), axis order (y, x1..xp, z)."""
        yxz = self.table.sum(axis=-2)
        denom = yxz.sum(axis=0, keepdims=True)
        return np.divide(yxz, denom, out=np.zeros_like(yxz), where=denom > 0)

    def pyx(self) -> np.ndarray:
        """Conditional f(y | x), axis order (y, x1..xp)."""
        yx = self.table.sum(axis=(-2, -1))
        denom = yx.sum(axis=0, keepdims=True)
        return np.divide(yx, denom, out=np.zeros_like(yx), where=denom > 0)

    def py(self) -> np.ndarray:
        return self.table.sum(axis=tuple(range(1, self.table.ndim)))

    def g_formula_oracle(self) -> np.ndarray:
        """Brute-force interventional distribution from the true joint:
        sum_u f(y|u,x) f(u), shape (m, 2..2)."""
        yxu = self.table.sum(axis=-1)  # (y, x..., u)
        pu_given = yxu.sum(axis=0, keepdims=True)
        fy_ux = np.divide(yxu, pu_given, out=np.zeros_like(yxu), where=pu_given > 0)
        pu = self.table.sum(axis=tuple(range(self.table.ndim - 2)) + (-1,))
        return np.tensordot(fy_ux, pu, axes=([-1], [0]))


def make_joint(
    pu: np.ndarray,
    bern: np.ndarray,
    pz_given_u: np.ndarray,
    py_given_ux: np.ndarray,
) -> DiscreteJoint:
    """Assemble a joint from its factorization.

    pu: (2,) confounder law; bern: (p, 2) success probability of each
    treatment per confounder level; pz_given_u: (2, 2) as [z, u];
    py_given_ux: (m, 2, 2..2) as (y, u, x1..xp).
    """
    pu = np.asarray(pu, float)
    bern = np.atleast_2d(np.asarray(bern, float))
    pz = np.asarray(pz_given_u, float)
    pyux = np.asarray(py_given_ux, float)
    p = bern.shape[0]
    m = pyux.shape[0]
    table = np.zeros((m,) + (2,) * p + (2, 2))
    for u in (0, 1):
        fx = np.ones((2,) * p)
        for j in range(p):
            probs = np.array([1 - bern[j, u], bern[j, u]])
            shape = [1] * p
            shape[j] = 2
            fx = fx * probs.reshape(shape)
        for z in (0, 1):
            # (y, x...) block for this (u, z)
            block = pyux[:, u] * fx[None, ...] * pu[u] * pz[z, u]
            table[(slice(None),) + (slice(None),) * p + (u, z)] += block
    return DiscreteJoint(table)


@dataclass(frozen=True)
class AdmissibleFit:
    """Fitted treatment-confounder mixture plus the solved conditionals."""

    pi: np.ndarray
    bern: np.ndarray
    fxu: np.ndarray  # (2..2, 2): joint of x and u
    discrepancy: float
    degenerate: bool
    label_switch: tuple[int, int]
    fzu: np.ndarray | None = None  # (2, 2) as [z, u]
    fyux: np.ndarray | None = None  # (m, 2, 2..2) as (y, u, x...)

    @property
    def p(self) -> int:
        return self.bern.shape[0]

    def fu(self) -> np.ndarray:
        return self.fxu.sum(axis=tuple(range(self.p)))

    def fu_given_x(self) -> np.ndarray:
        denom = self.fxu.sum(axis=-1, keepdims=True)
        return np.divide(
            self.fxu, denom, out=np.zeros_like(self.fxu), where=denom > 0
        )

    def confounded_set(self) -> set[int]:
        """Treatments the fitted confounder posterior varies with."""
        f = self.fu_given_x()[..., 1]
        out = set()
        for j in range(self.p):
            diff = np.abs(np.diff(f, axis=j)).max()
            if diff > COMPLETENESS_RTOL:
                out.add(j)
        return out


def _mixture_table(pi: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    p = a.shape[0]
    fx = np.zeros((2,) * p + (2,))
    for u, (wt, probs) in enumerate(((1 - pi, a), (pi, b))):
        comp = np.ones((2,) * p)
        for j in range(p):
            shape = [1] * p
            shape[j] = 2
            comp = comp * np.array([1 - probs[j], probs[j]]).reshape(shape)
        fx[..., u] = wt * comp
    return fx


def fit_mixture(px: np.ndarray, restarts: int = 20) -> AdmissibleFit:
    """Fit a two-component product-Bernoulli mixture to a treatment table
    by multi-start bounded least squares."""
    px = np.asarray(px, dtype=float)
    p = px.ndim
    if p < 3:
        raise InputError(f"mixture identification needs p >= 3 (got p={p})")
    if np.any(px < -TABLE_TOL) or abs(px.sum() - 1.0) > 1e-8:
        raise InputError("treatment table is not a probability table")

    # a table that factorizes into independent marginals carries no
    # information about a confounder: any two-component split fits it, so
    # return the canonical single-component fit flagged degenerate
    marg = [px.sum(axis=tuple(k for k in range(p) if k != j)) for j in range(p)]
    product = np.ones((2,) * p)
    for j in range(p):
        shape = [1] * p
        shape[j] = 2
        product = product * marg[j].reshape(shape)
    if np.abs(px - product).max() < 1e-9:
        m1 = np.array([m[1] for m in marg])
        fxu = np.zeros((2,) * p + (2,))
        fxu[..., 0] = px
        return AdmissibleFit(
            pi=np.array([1.0, 0.0]),
            bern=np.column_stack([m1, m1]),
            fxu=fxu,
            discrepancy=0.0,
            degenerate=True,
            label_switch=(0, 1),
        )

    def objective(theta):
        pi, a, b = theta[0], theta[1:1 + p], theta[1 + p:]
        diff = _mixture_table(pi, a, b).sum(axis=-1) - px
        return float(np.sum(diff**2))

    bounds = [(1e-6, 1 - 1e-6)] * (1 + 2 * p)
    rng = np.random.default_rng(1729)
    best = None
    for k in range(restarts):
        if k == 0:
            theta0 = np.concatenate([[0.5], np.full(2 * p, 0.3)])
            theta0[1 + p:] = 0.7
        else:
            theta0 = rng.uniform(0.05, 0.95, 1 + 2 * p)
        res = optimize.minimize(
            objective, theta0, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": 1000, "ftol": 1e-16, "gtol": 1e-13},
        )
        if best is None or res.fun < best.fun:
            best = res
        if best.fun < 1e-18:
            break
    # polish to machine precision; the downstream 2x2 inversions can be
    # ill conditioned at extreme treatment cells and amplify fit error
    def residuals(theta):
        pi, a, b = theta[0], theta[1:1 + p], theta[1 + p:]
        return (_mixture_table(pi, a, b).sum(axis=-1) - px).ravel()

    lo = np.full(1 + 2 * p, 1e-9)
    hi = 1 - lo
    polished = optimize.least_squares(
        residuals, np.clip(best.x, lo, hi), bounds=(lo, hi),
        xtol=1e-15, ftol=1e-15, gtol=1e-15,
    )
    final = polished.x if polished.cost * 2 <= best.fun else best.x
    fun = float(np.sum(residuals(final) ** 2))
    if fun > FIT_TOL:
        raise IdentificationError(
            f"mixture misfit: best squared discrepancy {fun:.3e} "
            "exceeds tolerance"
        )
    pi = float(final[0])
    a, b = final[1:1 + p].copy(), final[1 + p:].copy()
    # canonical component order: lexicographically smaller success vector
    # first; record the swap applied to the optimizer labels
    if tuple(b) < tuple(a):
        a, b = b, a
        pi = 1 - pi
        label_switch = (1, 0)
    else:
        label_switch = (0, 1)
    weights = np.array([1 - pi, pi])
    degenerate = bool(weights.min() < 1e-3)
    if not degenerate and np.max(np.abs(a - b)) < 1e-4:
        raise IdentificationError(
            "mixture components are indistinguishable; the confounder is "
            "not identified from the treatment table"
        )
    fxu = _mixture_table(pi, a, b)
    return AdmissibleFit(
        pi=weights,
        bern=np.column_stack([a, b]),
        fxu=fxu,
        discrepancy=fun,
        degenerate=degenerate,
        label_switch=label_switch,
    )


def solve_proxy(fit: AdmissibleFit, pzx: np.ndarray) -> np.ndarray:
    """Solve f(z,x) = sum_u f(z|u) f(x,u) for the 2x2 proxy law f(z|u)."""
    pzx = np.asarray(pzx, dtype=float)
    p = fit.p
    design = fit.fxu.reshape(-1, 2)  # cells x u
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= COMPLETENESS_RTOL * sv[0]:
        raise IdentificationError(
            "mixture components are collinear; proxy law not recoverable"
        )
    fzu = np.zeros((2, 2))
    for z in (0, 1):
        rhs = pzx[z].reshape(-1)
        sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
        fzu[z] = sol
    colsums = fzu.sum(axis=0)
    if np.any(np.abs(colsums - 1.0) > 1e-8):
        raise IdentificationError(
            "recovered proxy law is far from column-stochastic"
        )
    fzu = np.clip(fzu, 0.0, 1.0)
    fzu = fzu / fzu.sum(axis=0, keepdims=True)
    return fzu


def proxy_residual(fit: AdmissibleFit, pzx: np.ndarray, fzu: np.ndarray) -> float:
    """Max abs residual of f(z,x) - sum_u f(z|u) f(x,u)."""
    pzx = np.asarray(pzx, dtype=float)
    implied = np.tensordot(fzu, fit.fxu, axes=([1], [fit.p]))
    return float(np.abs(implied - pzx).max())


def _fu_given_xz(fit: AdmissibleFit, fzu: np.ndarray) -> np.ndarray:
    """Posterior f(u | x, z), shape (2..2, 2, 2) as (x..., z, u)."""
    joint = fit.fxu[..., None, :] * fzu[None, ...]  # (x..., z, u)
    denom = joint.sum(axis=-1, keepdims=True)
    return np.divide(joint, denom, out=np.zeros_like(joint), where=denom > 0)


def solve_outcome(fit: AdmissibleFit, pyxz: np.ndarray) -> np.ndarray:
    """Invert the 2x2 confounder kernel per treatment cell to recover
    f(y | u, x) from f(y | x, z); a non-solution beyond the clipping
    tolerance is evidence against the exclusion/equivalence assumptions."""
    if fit.fzu is None:
        raise InputError("fit proxy law first (solve_proxy)")
    pyxz = np.asarray(pyxz, dtype=float)
    m = pyxz.shape[0]
    p = fit.p
    post = _fu_given_xz(fit, fit.fzu)  # (x..., z, u)
    fyux = np.zeros((m, 2) + (2,) * p)
    for xcell in np.ndindex(*(2,) * p):
        kernel = post[xcell]  # (z, u)
        sv = np.linalg.svd(kernel, compute_uv=False)
        if sv[0] == 0.0 or sv[-1] <= COMPLETENESS_RTOL * sv[0]:
            raise IdentificationError(
                f"completeness failure at treatment cell {xcell}: the "
                "confounder kernel is singular"
            )
        rhs = pyxz[(slice(None),) + xcell + (slice(None),)]  # (y, z)
        sol = np.linalg.solve(kernel, rhs.T).T  # (y, u)
        if np.any(sol < -CLIP_TOL) or np.any(sol > 1 + CLIP_TOL):
            raise IdentificationError(
                f"no valid outcome law at treatment cell {xcell}: solution "
                f"leaves [0,1] by {max(-sol.min(), sol.max() - 1):.3e}; "
                "the auxiliary-variable assumptions appear violated"
            )
        sol = np.clip(sol, 0.0, 1.0)
        colsum = sol.sum(axis=0)
        if np.any(np.abs(colsum - 1.0) > 1e-8):
            sol = sol / colsum[None, :]
        fyux[(slice(None), slice(None)) + xcell] = sol
    return fyux


def g_formula(fit: AdmissibleFit) -> np.ndarray:
    """Interventional outcome distribution sum_u f(y|u,x) f(u)."""
    if fit.fyux is None:
        raise InputError("solve the outcome law first (solve_outcome)")
    return np.tensordot(fit.fyux, fit.fu(), axes=([1], [0]))


@dataclass(frozen=True)
class SharpNullResult:
    exists: bool
    discrepancy: float


def test_sharp_null_discrete(fit: AdmissibleFit, pyx: np.ndarray) -> SharpNullResult:
    """Check the no-effect hypothesis: for each confounded treatment, solve
    for an outcome law that ignores it, then compare the implied
    interventional distribution with the observed outcome margin."""
    pyx = np.asarray(pyx, dtype=float)
    m = pyx.shape[0]
    p = fit.p
    confounded = fit.confounded_set()
    if not confounded:
        raise IdentificationError(
            "no confounded treatments detected; the counting requirement "
            "for the test fails"
        )
    post = fit.fu_given_x()  # (x..., u)
    fu = fit.fu()
    py = np.tensordot(pyx, fit.fxu.sum(axis=-1), axes=(list(range(1, p + 1)),
                                                       list(range(p))))
    exists = True
    discrepancy = 0.0
    for s in sorted(confounded):
        rest_axes = [j for j in range(p) if j != s]
        for xbar in np.ndindex(*(2,) * (p - 1)):
            idx = [0] * p
            for j, ax in enumerate(rest_axes):
                idx[ax] = xbar[j]
            kernel = np.zeros((2, 2))
            rhs = np.zeros((2, m))
            for xs in (0, 1):
                idx[s] = xs
                cell = tuple(idx)
                kernel[xs] = post[cell]
                rhs[xs] = pyx[(slice(None),) + cell]
            sv = np.linalg.svd(kernel, compute_uv=False)
            if sv[0] == 0.0 or sv[-1] <= COMPLETENESS_RTOL * sv[0]:
                raise IdentificationError(
                    f"completeness failure for treatment {s}: kernel singular"
                )
            sol, res, *_ = np.linalg.lstsq(kernel, rhs, rcond=None)  # (u, y)
            residual = float(np.abs(kernel @ sol - rhs).max())
            if residual > FIT_TOL:
                exists = False
            if np.any(sol < -CLIP_TOL) or np.any(sol > 1 + CLIP_TOL):
                exists = False
            implied = fu @ sol  # (y,)
            discrepancy = max(discrepancy, float(np.abs(py - implied).max()))
    return SharpNullResult(exists=exists, discrepancy=discrepancy)


def save_joint_json(joint: DiscreteJoint, path) -> None:
    """Write a joint table as JSON nested arrays, axes [y, x1..xp, u, z]."""
    import json

    axes = ["y"] + [f"x{j + 1}" for j in range(joint.p)] + ["u", "z"]
    payload = {"axes": axes, "table": joint.table.tolist()}
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_joint_json(path) -> DiscreteJoint:
    import json

    with open(path) as fh:
        payload = json.load(fh)
    table = np.asarray(payload["table"], dtype=float)
    axes = payload.get("axes")
    expected = ["y"] + [f"x{j + 1}" for j in range(table.ndim - 3)] + ["u", "z"]
    if axes is not None and list(axes) != expected:
        raise InputError(f"unexpected axis order {axes}; expected {expected}")
    return DiscreteJoint(table)


def random_joint(
    rng: np.random.Generator,
    p: int = 3,
    m: int = 2,
    null_outcome: bool = False,
    separation: float = 0.3,
) -> DiscreteJoint:
    """Draw a valid joint with well-separated mixture components, an
    informative proxy, and an invertible confounder kernel.  With
    null_outcome the outcome law depends on the confounder only."""
    pu = np.array([0.0, 0.0])
    pu[0] = rng.uniform(0.25, 0.75)
    pu[1] = 1 - pu[0]
    low = rng.uniform(0.05, 0.45, p)
    high = low + rng.uniform(separation, 0.5, p)
    high = np.minimum(high, 0.95)
    bern = np.column_stack([low, high])
    # informative proxy: success probabilities differ across u
    z1 = rng.uniform(0.6, 0.9)
    z0 = rng.uniform(0.1, 0.4)
    pz_given_u = np.array([[1 - z0, 1 - z1], [z0, z1]])
    if null_outcome:
        base = rng.dirichlet(np.ones(m), size=2)  # (u, y)
        pyux = np.broadcast_to(
            base.T[:, :, None], (m, 2, 2 ** p)
        ).reshape((m, 2) + (2,) * p).copy()
    else:
        pyux = rng.dirichlet(np.ones(m), size=(2,) * (p + 1))  # (u, x..., y)
        pyux = np.moveaxis(pyux, -1, 0)  # (y, u, x...)
    return make_joint(pu, bern, pz_given_u, pyux)


def run_pipeline(joint_tables: dict) -> AdmissibleFit:
    """Convenience: run mixture fit, proxy solve, and outcome solve from
    observed tables {'px': ..., 'pzx': ..., 'pyxz': ...}."""
    fit = fit_mixture(joint_tables["px"])
    fzu = solve_proxy(fit, joint_tables["pzx"])
    fit = AdmissibleFit(
        pi=fit.pi, bern=fit.bern, fxu=fit.fxu, discrepancy=fit.discrepancy,
        degenerate=fit.degenerate, label_switch=fit.label_switch, fzu=fzu,
    )
    fyux = solve_outcome(fit, joint_tables["pyxz"])
    return AdmissibleFit(
        pi=fit.pi, bern=fit.bern, fxu=fit.fxu, discrepancy=fit.discrepancy,
        degenerate=fit.degenerate, label_switch=fit.label_switch, fzu=fit.fzu,
        fyux=fyux,
    )


# not a pytest case despite the name
test_sharp_null_discrete.__test__ = False

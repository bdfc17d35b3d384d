"""Monte Carlo harness: linear-Gaussian data-generating processes,
comparator estimators, and the replication engine producing bias and
coverage summaries.

Two canonical settings are built in.  The instrumented setting has six
treatments driven by two latent confounders and six instruments, plus a
pair of outcome proxies; the null-treatments setting has eight
treatments and no instruments.  Estimator configurations are looked up
by label from a registry, so experiment descriptions can be stored as
JSON.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .aux_linear import estimate_aux, estimate_aux_subset
from .bootstrap import bootstrap_ci
from .data import Dataset, center
from .errors import InputError, MultitreatError
from .linmodel import ols, tsls
from .null_treatments import estimate_null


@dataclass(frozen=True)
class DgpConfig:
    """Parameters of the linear-Gaussian data-generating process."""

    alpha: np.ndarray
    beta: np.ndarray
    delta_y: np.ndarray
    eta: np.ndarray | None = None
    delta_w: np.ndarray | None = None
    lam: np.ndarray | None = None
    noise_x: float = 1.0
    noise_y: float = 1.0
    noise_w: float = 1.0

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "delta_y", np.asarray(self.delta_y, dtype=float))
        for name in ("eta", "delta_w", "lam"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float))
        p, q = self.alpha.shape
        if self.beta.shape != (p,):
            raise InputError("beta length must match treatment count")
        if self.delta_y.shape != (q,):
            raise InputError("delta_y length must match confounder count")
        if self.eta is not None and self.eta.shape[0] != p:
            raise InputError("eta row count must match treatment count")
        if self.lam is not None:
            if self.eta is None or self.lam.shape != (self.eta.shape[1],):
                raise InputError("lam length must match instrument count")
        if self.delta_w is not None and self.delta_w.shape[1] != q:
            raise InputError("delta_w column count must match confounder count")
        if min(self.noise_x, self.noise_y, self.noise_w) <= 0:
            raise InputError("noise scales must be positive")

    @property
    def p(self) -> int:
        return self.alpha.shape[0]

    @property
    def q(self) -> int:
        return self.alpha.shape[1]


AUX_ALPHA = np.array([
    [0.0, 0.0],
    [1.0, 0.0],
    [1.5, 1.0],
    [2.0, -2.0],
    [2.5, 1.0],
    [2.0, -1.0],
])

AUX_ETA = np.array([
    [1, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 1],
    [0, 0, 1, 0, 0, 0],
    [0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 1, 0],
    [1, 0, 0, 0, 0, 1],
], dtype=float)

NULL_ALPHA = np.array([
    [0.0, 0.4, 0.8, 1.2, 1.5, -0.4, -0.8, -1.2],
    [0.0, 0.2, 0.4, 0.6, 0.8, -0.5, -1.0, -1.2],
]).T


def aux_preset(violation: bool = False) -> DgpConfig:
    """Instrumented six-treatment setting; with violation the instruments
    also enter the outcome directly."""
    lam = np.array([0.2, 0.2, 0.2, 0.2, 0.2, 0.3]) if violation else None
    return DgpConfig(
        alpha=AUX_ALPHA,
        eta=AUX_ETA,
        beta=np.ones(6),
        delta_y=np.array([1.0, 1.0]),
        delta_w=2.0 * np.eye(2),
        lam=lam,
    )


def null_preset(case: int = 1) -> DgpConfig:
    """Eight-treatment setting without instruments; case 1 has three
    active treatments, case 2 adds two weak ones."""
    beta = np.array([1.0, 1.0, 1.0, 0, 0, 0, 0, 0])
    if case == 2:
        beta[3] = beta[4] = 0.2
    elif case != 1:
        raise InputError(f"unknown case {case}")
    return DgpConfig(alpha=NULL_ALPHA, beta=beta, delta_y=np.array([1.0, 1.0]))


def gen_aux_setting(cfg: DgpConfig, n: int, rng: np.random.Generator) -> Dataset:
    """Draw a sample with instruments (and proxies when delta_w is set)."""
    if cfg.eta is None:
        raise InputError("instrumented setting needs eta")
    p, q, r = cfg.p, cfg.q, cfg.eta.shape[1]
    u = rng.standard_normal((n, q))
    z = rng.standard_normal((n, r))
    x = u @ cfg.alpha.T + z @ cfg.eta.T + cfg.noise_x * rng.standard_normal((n, p))
    y = x @ cfg.beta + u @ cfg.delta_y + cfg.noise_y * rng.standard_normal(n)
    if cfg.lam is not None:
        y = y + z @ cfg.lam
    w = None
    if cfg.delta_w is not None:
        s = cfg.delta_w.shape[0]
        w = u @ cfg.delta_w.T + cfg.noise_w * rng.standard_normal((n, s))
    return Dataset(y=y, x=x, z=z, w=w)


def gen_null_setting(cfg: DgpConfig, n: int, rng: np.random.Generator) -> Dataset:
    """Draw a sample from the instrument-free setting."""
    p, q = cfg.p, cfg.q
    u = rng.standard_normal((n, q))
    x = u @ cfg.alpha.T + cfg.noise_x * rng.standard_normal((n, p))
    y = x @ cfg.beta + u @ cfg.delta_y + cfg.noise_y * rng.standard_normal(n)
    return Dataset(y=y, x=x)


def generate(cfg: DgpConfig, n: int, rng: np.random.Generator) -> Dataset:
    if cfg.eta is not None:
        return gen_aux_setting(cfg, n, rng)
    return gen_null_setting(cfg, n, rng)


def ols_bias_oracle(cfg: DgpConfig) -> np.ndarray:
    """Population bias gamma delta of least squares of y on x in the
    instrument-free setting: gamma = Sigma_X^{-1} alpha."""
    sigma_x = cfg.alpha @ cfg.alpha.T + cfg.noise_x**2 * np.eye(cfg.p)
    gamma = np.linalg.solve(sigma_x, cfg.alpha)
    return gamma @ cfg.delta_y


def proximal_2sls(d: Dataset, treat_proxies, outcome_proxies, covariates=()) -> np.ndarray:
    """Proximal two-stage least squares: outcome proxies w enter the
    outcome equation instrumented by treatment proxies z, with the
    treatments and listed z covariates exogenous.  Returns the treatment
    coefficients."""
    if d.z is None or d.w is None:
        raise InputError("proximal estimation needs z and w blocks")
    treat = sorted(treat_proxies)
    outp = sorted(outcome_proxies)
    cov = sorted(covariates)
    d, _ = center(d)
    exog = np.hstack([d.x] + ([d.z[:, cov]] if cov else []))
    coef = tsls(
        d.y,
        endogenous=d.w[:, outp],
        instruments=d.z[:, treat],
        exogenous=exog,
    )
    m = len(outp)
    return coef[m:m + d.p]


def _iv_all(d: Dataset) -> np.ndarray:
    d, _ = center(d)
    return tsls(d.y, endogenous=d.x, instruments=d.z)


def _iv_partial(d: Dataset) -> np.ndarray:
    # first five treatments instrumented; sixth treatment and sixth
    # instrument treated as exogenous regressors
    d, _ = center(d)
    coef = tsls(
        d.y,
        endogenous=d.x[:, :5],
        instruments=d.z[:, :5],
        exogenous=np.column_stack([d.x[:, 5], d.z[:, 5]]),
    )
    return np.concatenate([coef[:5], coef[5:6]])


def _ols_treatments(d: Dataset) -> np.ndarray:
    d, _ = center(d)
    design = d.x if d.z is None else np.hstack([d.x, d.z])
    return ols(d.y[:, None], design).coef[: d.p, 0]


ESTIMATORS = {
    "IV1": _iv_all,
    "IV2": _iv_partial,
    "Aux1": lambda d: estimate_aux(d, q=2).beta,
    "Aux2": lambda d: estimate_aux_subset(d, q=2, iv_cols=(4, 5)).beta,
    "Aux3": lambda d: estimate_aux_subset(d, q=1, iv_cols=(5,)).beta,
    "PI1": lambda d: proximal_2sls(d, (4, 5), (0, 1), (0, 1, 2, 3)),
    "PI2": lambda d: proximal_2sls(d, (5,), (0,), (0, 1, 2, 3, 4)),
    "OLS": _ols_treatments,
    "Null1": lambda d: estimate_null(d, q=2).beta,
    "Null2": lambda d: estimate_null(d, q=1).beta,
}

PRESETS = {
    "aux": lambda: aux_preset(violation=False),
    "aux-violation": lambda: aux_preset(violation=True),
    "null-case1": lambda: null_preset(1),
    "null-case2": lambda: null_preset(2),
}


@dataclass(frozen=True)
class SummaryTable:
    """Per-coefficient Monte Carlo summary for one estimator and sample
    size."""

    estimator: str
    n: int
    bias: np.ndarray
    mc_sd: np.ndarray
    coverage: np.ndarray | None
    replications: int
    failures: int

    def to_dict(self) -> dict:
        out = {
            "estimator": self.estimator,
            "n": self.n,
            "bias": self.bias.tolist(),
            "mc_sd": self.mc_sd.tolist(),
            "replications": self.replications,
            "failures": self.failures,
        }
        out["coverage"] = None if self.coverage is None else self.coverage.tolist()
        return out


def run_experiment(spec: dict) -> list[SummaryTable]:
    """Run the replication study described by a JSON-style mapping with
    keys preset, estimators, n, replications, bootstrap_B (optional), and
    seed."""
    preset = spec["preset"]
    if preset not in PRESETS:
        raise InputError(f"unknown preset '{preset}'")
    cfg = PRESETS[preset]()
    labels = list(spec["estimators"])
    for lab in labels:
        if lab not in ESTIMATORS:
            raise InputError(f"unknown estimator label '{lab}'")
    sizes = [int(n) for n in np.atleast_1d(spec["n"])]
    reps = int(spec["replications"])
    B = int(spec.get("bootstrap_B") or 0)
    seed = int(spec.get("seed", 0))
    truth = cfg.beta
    tables = []
    for n in sizes:
        streams = np.random.SeedSequence((seed, n)).spawn(reps)
        for lab in labels:
            fn = ESTIMATORS[lab]
            estimates = []
            covered = []
            failures = 0
            for ss in streams:
                rng = np.random.default_rng(ss)
                d = generate(cfg, n, rng)
                try:
                    if B:
                        boot_seed = int(rng.integers(2**31))
                        res = bootstrap_ci(d, fn, B=B, seed=boot_seed)
                        estimates.append(res.point)
                        covered.append(res.covers(truth))
                    else:
                        estimates.append(np.asarray(fn(d), dtype=float))
                except (MultitreatError, np.linalg.LinAlgError):
                    failures += 1
            if not estimates:
                raise MultitreatError(
                    f"all replications failed for {lab} at n={n}"
                )
            est = np.asarray(estimates)
            tables.append(SummaryTable(
                estimator=lab,
                n=n,
                bias=est.mean(axis=0) - truth,
                mc_sd=est.std(axis=0, ddof=1),
                coverage=np.asarray(covered).mean(axis=0) if covered else None,
                replications=len(estimates),
                failures=failures,
            ))
    return tables


def tables_to_json(tables: list[SummaryTable], path) -> None:
    with open(path, "w") as fh:
        json.dump([t.to_dict() for t in tables], fh, indent=2)


def tables_to_csv(tables: list[SummaryTable], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator", "n", "coef", "bias", "mc_sd", "coverage",
                         "replications", "failures"])
        for t in tables:
            for j in range(t.bias.shape[0]):
                cov = "" if t.coverage is None else f"{t.coverage[j]:.4f}"
                writer.writerow([t.estimator, t.n, j + 1, f"{t.bias[j]:.6f}",
                                 f"{t.mc_sd[j]:.6f}", cov,
                                 t.replications, t.failures])


def make_panel_fixture(n: int = 227, p: int = 17, r: int = 5, q: int = 2,
                       seed: int = 0) -> Dataset:
    """Synthetic dataset shaped like a small observational panel: n rows,
    p treatments, r instrument columns, latent confounding of rank q."""
    rng = np.random.default_rng(seed)
    alpha = rng.normal(scale=1.0, size=(p, q))
    eta = (rng.random((p, r)) < 0.3).astype(float)
    beta = rng.normal(scale=0.5, size=p)
    delta = rng.normal(scale=1.0, size=q)
    u = rng.standard_normal((n, q))
    z = rng.standard_normal((n, r))
    x = u @ alpha.T + z @ eta.T + rng.standard_normal((n, p))
    y = x @ beta + u @ delta + rng.standard_normal(n)
    names = {
        "outcome": ["y"],
        "treatments": [f"x{j + 1}" for j in range(p)],
        "instruments": [f"z{k + 1}" for k in range(r)],
        "proxies": [],
    }
    return Dataset(y=y, x=x, z=z, names=names)

"""Estimation of causal effects of multiple treatments under unmeasured
confounding, via auxiliary variables (instruments or confounder proxies)
and the null-treatments strategy.

Main entry points:

- estimate_aux, estimate_aux_subset: linear estimator correcting
  confounding bias through instruments.
- estimate_null, test_sharp_null_linear: estimator assuming most
  confounded treatments have no effect, plus the associated test.
- discrete: exact solver on finite supports with a binary confounder.
- deconv: Fourier-deconvolution recovery of outcome densities with a
  normal confounder.
- bootstrap_ci: seeded pairs bootstrap for any coefficient estimator.
- sim: data-generating processes and the replication harness.
"""

from .aux_linear import AuxEstimate, estimate_aux, estimate_aux_subset
from .bootstrap import BootstrapResult, bootstrap_ci
from .data import Dataset, center, load_csv, load_schema, uncenter
from .errors import (
    ConvergenceError,
    IdentificationError,
    InputError,
    MultitreatError,
)
from .factor import FactorFit, fit_factor, fit_factor_cov, sufficiency_test
from .null_treatments import (
    NullEstimate,
    SharpNullTest,
    estimate_null,
    test_sharp_null_linear,
)
from .robust import LmsFit, lms

__all__ = [
    "AuxEstimate",
    "BootstrapResult",
    "ConvergenceError",
    "Dataset",
    "FactorFit",
    "IdentificationError",
    "InputError",
    "LmsFit",
    "MultitreatError",
    "NullEstimate",
    "SharpNullTest",
    "bootstrap_ci",
    "center",
    "estimate_aux",
    "estimate_aux_subset",
    "estimate_null",
    "fit_factor",
    "fit_factor_cov",
    "lms",
    "load_csv",
    "load_schema",
    "sufficiency_test",
    "test_sharp_null_linear",
    "uncenter",
]

__version__ = "0.1.0"

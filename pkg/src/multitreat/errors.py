"""Exception hierarchy shared by all estimators.

The CLI maps these onto process exit codes, so estimator code should raise
the most specific class that applies.
"""


class MultitreatError(Exception):
    """Base class for all package errors."""


class InputError(MultitreatError):
    """Invalid user input: malformed files, bad shapes, missing columns."""


class IdentificationError(MultitreatError):
    """A rank, completeness, or identification condition failed."""


class ConvergenceError(MultitreatError):
    """An iterative fit did not converge or produced an unusable optimum."""

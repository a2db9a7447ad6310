"""Exception types shared across the package.

Every error raised on a documented failure path derives from
:class:`LossRankError`, so callers can distinguish library failures from
programming errors.  The CLI maps these onto exit codes: validation
problems exit 2, numerical degeneracies exit 3, budget overruns exit 4.
"""


class LossRankError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LossRankError, ValueError):
    """Malformed input: wrong shape, bad parameter value, non-finite data."""


class RankDeficientError(ValidationError):
    """A design matrix has (numerically) dependent columns."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class NotPositiveDefiniteError(LossRankError):
    """A matrix required to be positive definite is not."""


class SolveError(LossRankError):
    """A linear solve failed because the system is singular or indefinite."""


class SingularityError(LossRankError):
    """A determinant-based quantity is undefined (zero modes, singular I - M)."""


class DegenerateFitError(LossRankError):
    """The regressor interpolates every response, so its loss rank is -inf."""


class DegeneratePredictionError(LossRankError):
    """Self-consistent prediction has no stable fixed point at this input."""


class BudgetExceededError(LossRankError):
    """An enumeration or grid size exceeds the configured budget."""


class DivergenceError(LossRankError):
    """A series expansion does not converge for the given operator."""

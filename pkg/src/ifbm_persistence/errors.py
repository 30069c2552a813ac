"""Exception hierarchy shared across the package."""


class PersistenceError(Exception):
    """Base class for all errors raised by :mod:`ifbm_persistence`."""


class ValidationError(PersistenceError, ValueError):
    """An input is outside the domain of an operation."""


class NumericalError(PersistenceError, ArithmeticError):
    """A numerical procedure failed."""


class NonPositiveDefinite(NumericalError):
    """A factorization pivot fell below the acceptance threshold.

    Attributes
    ----------
    step : int
        Index of the failing pivot.
    """

    def __init__(self, step, pivot=None):
        self.step = int(step)
        self.pivot = pivot
        msg = f"non-positive pivot at step {self.step}"
        if pivot is not None:
            msg += f" (pivot={pivot:.3e})"
        super().__init__(msg)


class PrecisionExhausted(NumericalError):
    """Coefficient oscillations exceed the hard limit for the precision mode."""

    def __init__(self, score, limit, report=None):
        self.score = score
        self.limit = limit
        self.report = report
        super().__init__(
            f"oscillation score {score:.3g} exceeds hard limit {limit:.3g}; "
            "retry with precision_mode='extended'"
        )


class QuadratureFailure(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class OutOfRange(ValidationError):
    """Argument outside the range where a root exists."""


class InsufficientData(PersistenceError):
    """Too few observations to form an estimate."""

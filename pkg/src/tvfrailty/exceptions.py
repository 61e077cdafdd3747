"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to reach its accuracy target.

    Attributes
    ----------
    achieved : float or None
        Error estimate reached before giving up, when known.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class DataError(ValueError):
    """Malformed or inconsistent current-status data."""


class ConvergenceWarning(UserWarning):
    """Optimizer or interval search did not terminate cleanly."""


class ConvergenceError(RuntimeError):
    """No usable fit was obtained."""

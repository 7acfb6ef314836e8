"""Exception hierarchy shared by all modules."""


class GprInvertError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(GprInvertError, ValueError):
    pass


class StabilityError(GprInvertError):
    """Grid violates the Courant bound; the solver refuses to run."""


class NumericalFailureError(GprInvertError):
    """A non-finite field value appeared during time stepping."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DegenerateSignalError(GprInvertError, ValueError):
    pass


class ConditioningError(GprInvertError):
    pass


class InversionError(GprInvertError):
    """Every evaluation of an inversion failed."""

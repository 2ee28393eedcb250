"""Exception and warning types shared across the package."""


class AcarError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(AcarError):
    """A parameter vector violates the admissible box."""


class NumericalError(AcarError):
    """A computation produced non-finite values or an unusable matrix.

    Carries the offending condition number when the failure is a
    near-singular linear system.
    """

    def __init__(self, message: str, condition_number: float | None = None):
        super().__init__(message)
        self.condition_number = condition_number


class DataError(AcarError):
    """Malformed or inconsistent input data."""


class ConvergenceWarning(UserWarning):
    """The optimizer stopped without meeting its convergence criteria."""


class DataWarning(UserWarning):
    """The data are usable but degenerate in a way worth flagging."""

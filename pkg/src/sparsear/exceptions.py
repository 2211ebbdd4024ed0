"""Exception hierarchy shared by every module of the package."""


class SparseARError(Exception):
    """Base class for all package errors."""


class DataError(SparseARError, ValueError):
    """Input data is malformed, too short, or otherwise unusable."""


class NumericalError(SparseARError, ArithmeticError):
    """A numerical procedure failed or was asked to work on an unstable model."""


class InvalidLength(DataError):
    pass


class TooShort(DataError):
    pass


class TooLarge(DataError):
    pass


class NonPositiveForLog(DataError):
    pass


class ColumnNotFound(DataError):
    pass


class ParseError(DataError):
    """A CSV cell could not be parsed as a finite float.

    Parameters
    ----------
    row : int
        1-based line number in the source file.
    detail : str
        Human readable reason.
    """

    def __init__(self, row, detail):
        self.row = row
        self.detail = detail
        super().__init__(f"row {row}: {detail}")


class UnstableModel(NumericalError):
    pass


class NotSufficientlyStable(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class NoConvergence(NumericalError):
    """Iterative solver hit ``max_iter``; ``theta`` holds the best iterate."""

    def __init__(self, message, theta=None, n_iter=None):
        super().__init__(message)
        self.theta = theta
        self.n_iter = n_iter

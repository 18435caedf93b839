"""Exception hierarchy shared by the library and the command line."""


class GsrpError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GsrpError, ValueError):
    """Invalid or inconsistent run configuration."""


class NumericalError(GsrpError, ArithmeticError):
    """A numerical precondition was violated during computation."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization hit a non-positive pivot.

    Attributes
    ----------
    pivot : int
        Index of the first failing pivot.
    index : tuple of int
        Position of the failing matrix within a stacked input.
    """

    def __init__(self, pivot, index=(), message=None):
        self.pivot = int(pivot)
        self.index = tuple(int(i) for i in index)
        if message is None:
            message = f"matrix is not positive definite (pivot {self.pivot})"
            if self.index:
                message += f" at stack index {self.index}"
        super().__init__(message)


class DegenerateSteeringError(NumericalError):
    """A beamformer normalization term vanished for a nonzero steering vector."""

    def __init__(self, message, bin=None, point=None, index=()):
        self.index = tuple(int(i) for i in index)
        self.bin = bin
        self.point = point
        where = []
        if bin is not None:
            where.append(f"bin {bin}")
        if point is not None:
            where.append(f"point {point}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)

"""Exception types raised across the package."""


class DiscerrError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(DiscerrError, ValueError):
    pass


class InvalidGridError(InvalidArgumentError):
    pass


class GridMismatchError(InvalidArgumentError):
    """A path grid does not contain the time points an operation needs."""


class DomainError(DiscerrError, ValueError):
    """A state value lies outside the state space of the model."""


class ClampError(DiscerrError, ValueError):
    """Derivative evaluation requested too close to maturity."""


class AccuracyError(DiscerrError, ArithmeticError):
    """Quadrature failed to converge under node doubling.

    ``divergent`` is set when the failure looks like a non-integrable
    singularity rather than slow convergence.
    """

    def __init__(self, message, divergent=False):
        super().__init__(message)
        self.divergent = divergent


class DataError(DiscerrError, ValueError):
    """Sampled values are unusable (non-finite)."""

    def __init__(self, message, stream_ids=()):
        super().__init__(message)
        self.stream_ids = tuple(stream_ids)


class PrecisionError(DiscerrError, ValueError):
    """Too few samples for the requested statistic."""

"""Exception types and warning categories shared across the package."""


class CdinferError(Exception):
    """Base class for all package-specific errors."""


class DomainError(CdinferError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class BoundaryError(CdinferError, ValueError):
    """An estimate or value sits on a boundary where the operation is undefined
    (rate estimate of 0 or 1, p-value exactly 0 or 1, zero standard error)."""


class ConvergenceError(CdinferError, RuntimeError):
    """An iterative solver failed to reach its tolerance.

    Carries the last iterate and the residual so callers can diagnose or
    decide to flag-and-continue (the simulation lab does the latter).
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class GridMismatchError(CdinferError, ValueError):
    """Two tabulated functions were combined but live on different grids."""


class OutOfRangeError(CdinferError, ValueError):
    """A query point lies outside the tabulated range of a function."""


class DegenerateMassError(CdinferError, ValueError):
    """A weighted sum has zero total mass, so normalization is impossible."""


class SchemaError(CdinferError, ValueError):
    """A serialized file does not match its expected schema.

    ``line`` is the 1-based line number of the first offending line when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TruncationWarning(UserWarning):
    """The parameter grid truncates non-negligible probability mass."""


class ClampWarning(UserWarning):
    """A value was clamped away from a boundary to keep an operation defined."""

"""Exception hierarchy; the CLI maps each class to an exit code."""


class PbtError(Exception):
    """Base class for all package errors."""


class ValidationError(PbtError, ValueError):
    """Malformed input: non-Hermitian matrix, bad label, wrong shape."""


class DomainError(PbtError, ValueError):
    """Arguments outside the mathematical domain of an operation."""


class NotPSDError(ValidationError):
    """Operator expected to be positive semidefinite has a negative eigenvalue."""


class ResourceError(PbtError):
    """Problem size exceeds a desk-scale cap."""


class ConvergenceError(PbtError):
    """Iterative solver stopped before reaching its tolerance.

    ``best`` carries the last iterate so callers can still inspect it.
    """

    def __init__(self, message, best=None, gap=None):
        super().__init__(message)
        self.best = best
        self.gap = gap

"""Exception types shared across the package."""


class QtspError(Exception):
    """Base class for all qtsp errors."""


class InvalidInstanceError(QtspError):
    """Distance matrix or city count violates the instance invariants."""


class InvalidTourError(QtspError):
    """A tour argument is not a permutation of 1..N."""


class SizeLimitError(QtspError):
    """Problem size exceeds the guard for an exponential/factorial routine."""

"""Exception types shared by all modules."""


class KinexError(Exception):
    """Base class for package errors."""


class DomainError(KinexError, ValueError):
    """An input lies outside the set where the operation is defined."""


class RangeError(KinexError, OverflowError):
    """A result is not representable in floating point."""


class ConvergenceError(KinexError, RuntimeError):
    """An iterative solver failed to converge."""


class StepError(KinexError, RuntimeError):
    """A time step could not be taken (stability limit or inadmissible state)."""


class ValidationError(KinexError, ValueError):
    """Malformed arguments or configuration."""

"""Exception types shared across the package."""


class LekiError(Exception):
    """Base class for all errors raised by :mod:`leki`."""


class ConfigurationError(LekiError, ValueError):
    """Inconsistent shapes, missing settings or malformed input files."""


class UsageError(LekiError, ValueError):
    """An operation was called outside its contract (e.g. eigenvalues of an
    asymmetric matrix)."""


class DomainError(LekiError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class NumericFailure(LekiError, ArithmeticError):
    """Non-finite values, singular systems or non-converged quadrature."""

"""Exception hierarchy shared across the package."""


class GdSolverError(Exception):
    """Base class for every error raised by :mod:`gdsolver`."""


class InvalidInputError(GdSolverError, ValueError):
    """Arguments violate an operation's preconditions."""


class FormatError(GdSolverError, ValueError):
    """A serialized file (IDX, network snapshot) is malformed."""


class NumericalError(GdSolverError, ArithmeticError):
    """Non-finite values or a numerically singular basis."""


class ConfigurationError(GdSolverError):
    """A configuration value cannot produce a valid encoding."""


class ConsistencyError(GdSolverError):
    """An internal invariant was violated."""

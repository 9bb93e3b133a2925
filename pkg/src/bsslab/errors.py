"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration errors -> 2,
data errors -> 3, numeric/regime/degenerate errors -> 4.
"""


class BssError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BssError):
    """Invalid or inconsistent run configuration."""


class DataError(BssError):
    """Malformed or unusable input data."""


class DomainError(BssError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericError(BssError):
    """A numeric routine failed to reach its accuracy target."""


class RegimeError(BssError):
    """Parameters fall outside the regime where a limit theorem applies."""


class DegenerateInputError(BssError):
    """Input carries no usable variation (e.g. a constant series)."""

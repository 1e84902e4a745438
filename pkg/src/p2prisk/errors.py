"""Exception hierarchy shared by every stage of the pipeline.

The CLI maps each class to an exit code, so raise the most specific one.
"""


class P2PRiskError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(P2PRiskError, ValueError):
    """Bad configuration, flags, or missing input paths."""

    exit_code = 1


class DataError(P2PRiskError, ValueError):
    """Input data violates a contract (schema, duplicates, gaps, shapes)."""

    exit_code = 2


class NumericalError(P2PRiskError, ArithmeticError):
    """A numerical routine could not produce a valid result."""

    exit_code = 3


class ShapeError(DataError):
    """Array dimensions do not agree."""

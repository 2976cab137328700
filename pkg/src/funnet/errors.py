"""Exception hierarchy shared across the library and the CLI.

The three direct subclasses of :class:`FunnetError` map onto the CLI exit
codes: configuration problems exit with 2, data problems with 3, and
numerical failures with 4.
"""


class FunnetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FunnetError):
    """Invalid argument, option, or run configuration."""

    exit_code = 2


class DataError(FunnetError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class NumericError(FunnetError):
    """Numerical failure: singular system, non-finite value, divergence."""

    exit_code = 4


class OutOfDomainError(ConfigError):
    """Evaluation point outside the basis domain."""


class DomainMismatchError(ConfigError):
    """Two objects that must share a domain do not."""


class UnsupportedError(ConfigError):
    """Operation not defined for the given object (e.g. derivative order)."""


class NotRecordedError(ConfigError):
    """Requested training diagnostics were not recorded."""


class UnderdeterminedError(NumericError):
    """Fewer observations than unknowns in a least-squares fit."""


class RankError(NumericError):
    """Rank-deficient or singular linear system."""

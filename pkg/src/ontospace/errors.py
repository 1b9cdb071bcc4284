"""Exception hierarchy shared by all subsystems.

Each class maps to a CLI exit code so scripted callers can branch on
failure category without parsing messages.
"""


class OntospaceError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(OntospaceError):
    """Invalid configuration value or malformed config file."""

    exit_code = 2


class DataError(OntospaceError):
    """Malformed or inconsistent dataset/vector/checkpoint input."""

    exit_code = 3


class NumericError(OntospaceError):
    """Non-finite loss or gradient encountered during training."""

    exit_code = 4


class CheckpointError(DataError):
    """Unreadable, truncated, or version-incompatible checkpoint."""

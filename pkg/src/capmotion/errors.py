"""Exception taxonomy shared by the library and the CLI.

The CLI maps these onto process exit codes:

* :class:`ConfigError`     -> exit 2 (bad run configuration)
* :class:`DataError`       -> exit 3 (malformed or inconsistent input data)
* :class:`NumericalError`  -> exit 4 (non-finite values, failed optimisation)
"""

from __future__ import annotations


class CapmotionError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CapmotionError):
    """A run configuration failed validation.

    ``key`` names the offending config entry when known.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class DataError(CapmotionError):
    """Input data violates the session / file contract."""


class ParseError(DataError):
    """A session file could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class SchemaError(DataError):
    """Structured objects disagree (feature manifests, label sets, shapes)."""


class AlignmentError(DataError):
    """Two recordings share no usable overlap in time."""


class DomainError(CapmotionError):
    """An argument is outside the mathematical domain of an operation."""


class NumericalError(CapmotionError):
    """A numeric routine produced non-finite values or failed to converge."""


class TrainingError(NumericalError):
    """Model fitting could not produce a usable model."""

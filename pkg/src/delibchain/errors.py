"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes, so new failure modes should subclass
one of the four categories below rather than raising bare exceptions.
"""

from __future__ import annotations


class DelibchainError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DelibchainError):
    """Invalid configuration or infeasible parameter combination."""


class DataValidationError(DelibchainError):
    """Input data violates a structural invariant."""


class ParseError(DataValidationError):
    """A record could not be parsed; carries file position context."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class NumericError(DelibchainError):
    """Non-finite values or failed numerical checks during training."""


class ExternalServiceError(DelibchainError):
    """A remote annotation endpoint failed after retries."""

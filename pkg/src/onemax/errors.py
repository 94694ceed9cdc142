"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class UnsupportedExponentError(DomainError):
    """The requested exponent hits a singular case of a closed form."""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class InputDataError(ValueError):
    """A price file is missing or malformed.

    ``kind`` distinguishes the failure: ``missing_file``, ``bad_header``,
    ``malformed_row``, ``non_monotone`` or ``non_positive``. ``line`` is the
    1-based line number when the failure is tied to a row.
    """

    def __init__(self, kind: str, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{kind}: {message}{where}")
        self.kind = kind
        self.line = line


class InvariantViolation(RuntimeError):
    """A verification run found a result contradicting a proven guarantee."""

"""Exception types shared across the package."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for errors raised by this package."""


class FormatError(EngineError):
    """A file could not be parsed or failed validation.

    Carries the offending path and, when meaningful, the 1-based line
    number so callers can point at the exact spot.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DimensionMismatch(EngineError, ValueError):
    """Vector lengths disagree where they must match."""

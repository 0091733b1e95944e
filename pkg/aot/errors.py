"""
Exceptions raised by the toolkit.

Every precondition failure is an `InvalidInputError`, which is also a
`ValueError`, so callers can treat it like pydantic's own validation errors.
"""

from typing import Optional


class AOTError(Exception):
    """Base class for toolkit errors."""


class InvalidInputError(AOTError, ValueError):
    """An argument, flag or file violates a documented precondition."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class DatasetFormatError(InvalidInputError):
    """A dataset CSV could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}", field="path")
        self.line = line


class CheckpointError(AOTError):
    """A checkpoint could not be written or read."""


class CorruptCheckpointError(CheckpointError):
    """The checkpoint file is truncated, not JSON, or missing fields."""


class CheckpointVersionError(CheckpointError):
    """The checkpoint was written by an unsupported format version."""


class GuidanceError(AOTError):
    """Discriminator guidance produced a non-finite correction."""

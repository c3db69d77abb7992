"""Exception types shared across the package."""

from __future__ import annotations


class CtxmapError(ValueError):
    """Base class for all errors raised by this package."""


class DataFormatError(CtxmapError):
    """A file or byte stream does not conform to its declared format.

    Messages carry the offending location (line number or byte offset)
    whenever one is known.
    """


class ValidationError(CtxmapError):
    """An operation precondition does not hold for the given inputs."""


class StageError(CtxmapError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

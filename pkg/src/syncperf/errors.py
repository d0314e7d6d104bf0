"""Exception types shared across the toolkit."""

from __future__ import annotations


class SyncperfError(Exception):
    """Base class for all toolkit errors.

    Carries a short machine-readable code used by the CLI error stream.
    """

    code = "E_GENERIC"


class ValidationError(SyncperfError):
    """Input violates a documented precondition or invariant."""

    code = "E_VALIDATION"


class ParseError(SyncperfError):
    """A file could not be parsed; points at the offending location."""

    code = "E_PARSE"

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)

"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SQDError(Exception):
    """Base class for all errors raised by sqdkit."""


class ParseError(SQDError, ValueError):
    """Malformed input text. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LengthMismatch(ParseError):
    pass


class SpecError(SQDError, ValueError):
    """Inconsistent particle numbers / orbital counts."""


class SpecMismatch(SQDError, ValueError):
    """Configurations do not belong to the expected particle-number sector."""


class CapExceeded(SQDError):
    """A dimension cap protecting an exhaustive routine was violated."""


class EmptyBasis(SQDError, ValueError):
    pass


class Unsupported(SQDError):
    pass


class NoConvergence(SQDError):
    """Raised by the eigensolvers; ``result`` carries the best iterate."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result

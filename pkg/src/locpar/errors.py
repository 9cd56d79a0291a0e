"""Semantic exception hierarchy.

Every error raised by this package derives from :class:`LocparError`, so
callers can catch one base type at an API boundary.  Where a builtin type
is the natural Python fit, the class inherits from it as well (e.g.
``IndexOutOfRangeError`` is also an ``IndexError``).
"""


class LocparError(Exception):
    """Base class for all errors raised by locpar."""


class InvalidArgumentError(LocparError, ValueError):
    """An argument violates a precondition (shape, range, type)."""


# --- observation models ---

class EmptyWindowError(LocparError, ValueError):
    """An observation window with no data points."""


class SupportViolationError(LocparError, ValueError):
    """An observation lies outside the family's support."""


class DomainViolationError(LocparError, ValueError):
    """A parameter value lies outside the family's domain."""


# --- interval grids ---

class BadRatioError(LocparError, ValueError):
    """Grid ratio outside the admissible range (1, 3]."""


class GridTooLongError(LocparError, ValueError):
    """The largest candidate interval extends past the series start."""


class IndexOutOfRangeError(LocparError, IndexError):
    """A step index outside 1..K (or 1..K-1 for tested sets)."""


# --- procedures ---

class LengthMismatchError(LocparError, ValueError):
    """Critical-value vector length does not match the grid."""


class GridTooSmallError(LocparError, ValueError):
    """The procedure needs at least two interval scales."""


# --- calibration ---

class InfeasibleError(LocparError):
    """No critical value below the search bound meets the risk budget."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"risk budget infeasible at step {step}")


# --- data ingestion ---

class ParseError(LocparError, ValueError):
    """A data file could not be parsed; carries the offending row."""

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class NonpositivePriceError(LocparError, ValueError):
    """A price at or below zero cannot enter a log-return series."""


class TooShortError(LocparError, ValueError):
    """A series is too short for the requested transform."""

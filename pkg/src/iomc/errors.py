"""Exception hierarchy shared by all iomc modules."""

from __future__ import annotations


class IOMCError(Exception):
    """Base class for every error raised by iomc."""


class SanitizationError(IOMCError, ValueError):
    """Input contains NaN or infinite values where finite data is required."""


class LayoutError(IOMCError, ValueError):
    """Matrix or panel dimensions are inconsistent with the declared index."""


class IllPosedLayoutError(LayoutError):
    """A panel layout leaves some matrix row or column without observed entries.

    Soft Impute reconstructs such rows/columns as all zeros, so the completion
    problem carries no information about them.
    """

    def __init__(self, message: str, rows=(), cols=()):
        super().__init__(message)
        self.rows = tuple(int(r) for r in rows)
        self.cols = tuple(int(c) for c in cols)


class CountryLookupError(IOMCError, KeyError):
    """A country code is not part of the table index."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown country"


class MetricError(IOMCError, ValueError):
    """A metric was requested over an empty position set or mismatched shapes."""


class SelectionError(IOMCError, ValueError):
    """Lambda selection is impossible (for example, an empty validation set)."""


class ParseError(IOMCError, ValueError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)

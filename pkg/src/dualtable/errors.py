"""Exception hierarchy for the dualtable engine."""

from __future__ import annotations


class DualTableError(Exception):
    """Base class for all errors raised by this package on purpose."""


class SchemaError(DualTableError):
    """Bad schema definition or a value that does not fit its column type."""


class CatalogError(DualTableError):
    """Catalog inconsistency: unknown table, duplicate name, bad manifest."""


class StorageError(DualTableError):
    """Segment or journal level failure: bad magic, CRC mismatch, truncation."""


class DeltaError(DualTableError):
    """Attached-store contract violation, e.g. patching a deleted record."""


class PlanError(DualTableError):
    """Invalid cost-model parameters or an impossible plan request."""


class ParseError(DualTableError):
    """Statement text rejected by the DML parser.

    Carries 1-based position info and the token set the parser would have
    accepted, so callers can render "line:col: message" diagnostics.
    """

    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected


class ExecutionError(DualTableError):
    """Statement failed during evaluation (unknown column, type clash...)."""

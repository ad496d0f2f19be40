"""Exception hierarchy shared across the engine.

Every error raised by tabletide derives from :class:`TableTideError` so
callers can catch engine failures without swallowing programming bugs.
Errors that carry structured context expose it as attributes.
"""

from __future__ import annotations

from typing import Any, Optional, Sequence


class TableTideError(Exception):
    """Base class for all engine errors."""


# ---------------------------------------------------------------------------
# Value / schema errors


class TypeMismatch(TableTideError):
    """A value does not satisfy the declared or expected data type."""

    def __init__(self, message: str, tags: Optional[tuple] = None):
        super().__init__(message)
        self.tags = tags


class ArityMismatch(TableTideError):
    """Row width or argument count differs from the schema."""


class DuplicateColumn(TableTideError):
    """A column name is already present in the table."""


class UnknownColumn(TableTideError):
    """A referenced column does not exist."""


class UnknownHandle(TableTideError):
    """A referenced environment handle is not bound."""


class IndexOutOfRange(TableTideError):
    """A row index selector points past the end of the table."""


class NameCollision(TableTideError):
    """A generated or requested name collides with an existing one."""


class MixedDtypes(TableTideError):
    """Columns that must share one data type do not."""


class NotText(TableTideError):
    """Operation requires a text column."""


class NotNumeric(TableTideError):
    """Operation requires a numeric (integer or float) column."""


class NotAPermutation(TableTideError):
    """A column reordering is not a permutation of the table's columns."""


class NoRowSelected(TableTideError):
    """A row selector that must match at least one row matched none."""


class MissingBinSpec(TableTideError):
    """Numeric decomposition requires an explicit bin specification."""


class BadBinSpec(TableTideError):
    """Bin specification is malformed or does not cover the observed range."""


class KeyInRightSet(TableTideError):
    """The split key column may not appear in the right-hand column set."""


class SchemaMismatch(TableTideError):
    """Tables that must share a schema do not."""


class DuplicateKeyPair(TableTideError):
    """Unfold found a repeated (identifier, key level) pair."""

    def __init__(self, message: str, pairs: Sequence[tuple] = ()):
        super().__init__(message)
        self.pairs = list(pairs)


class DuplicateRightKey(TableTideError):
    """Join keys on the right side are not unique."""

    def __init__(self, message: str, keys: Sequence[Any] = ()):
        super().__init__(message)
        self.keys = list(keys)


class ColumnNameCollision(TableTideError):
    """Both join sides carry a non-key column of the same name."""


class AllNullGroup(TableTideError):
    """Interpolation cannot fill a group that has no non-null values."""


class EvalError(TableTideError):
    """Expression evaluation failed on a specific row."""

    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


# ---------------------------------------------------------------------------
# Pipeline language errors


class ParseError(TableTideError):
    """Pipeline source text could not be parsed.

    Positions are 1-based and point into the source text.
    """

    def __init__(self, line: int, column: int, message: str, token: str = ""):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message
        self.token = token


class UnknownOperation(TableTideError):
    """An operation name is not in the registry."""


class ExecError(TableTideError):
    """Pipeline execution failed at a specific statement."""

    def __init__(self, statement_index: int, line: int, cause: Exception):
        super().__init__(
            f"statement {statement_index + 1} (line {line}): {cause}"
        )
        self.statement_index = statement_index
        self.line = line
        self.cause = cause


# ---------------------------------------------------------------------------
# I/O errors


class IoError(TableTideError):
    """File could not be read or written."""


class RaggedRow(TableTideError):
    """A CSV record has a different field count than the header."""

    def __init__(self, line: int, expected: int, got: int):
        super().__init__(
            f"line {line}: expected {expected} fields, got {got}"
        )
        self.line = line
        self.expected = expected
        self.got = got


class BadQuoting(TableTideError):
    """A CSV record violates RFC-4180 quoting."""

    def __init__(self, line: int, detail: str):
        super().__init__(f"line {line}: {detail}")
        self.line = line


class NetworkError(TableTideError):
    """An HTTP fetch failed before a response arrived."""


class HttpStatusError(TableTideError):
    """An HTTP fetch returned a non-success status."""

    def __init__(self, code: int, url: str):
        super().__init__(f"HTTP {code} from {url}")
        self.code = code
        self.url = url


# ---------------------------------------------------------------------------
# Provenance errors


class UnknownNode(TableTideError):
    """A referenced provenance node does not exist."""


class TombstonedInput(TableTideError):
    """An operation tried to consume a tombstoned table version."""

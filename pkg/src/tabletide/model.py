"""Core data model: typed cells, columns, immutable tables, environments.

Cells are plain Python scalars tagged by type: ``None`` (null), ``bool``,
``int`` (64-bit signed), ``float`` (finite 64-bit binary), ``str`` and
``datetime.date``. Tables are immutable once constructed; every operation
builds new tables and never touches its inputs.
"""

from __future__ import annotations

import datetime as dt
from collections import Counter
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Any, Iterator, Optional, Sequence, Union

from .errors import (
    ArityMismatch,
    DuplicateColumn,
    IndexOutOfRange,
    TypeMismatch,
    UnknownColumn,
    UnknownHandle,
)

# Cell type tags.
NULL = "null"
BOOLEAN = "boolean"
INTEGER = "integer"
FLOAT = "float"
TEXT = "text"
DATE = "date"

#: Column kinds (every non-null tag).
KINDS = (BOOLEAN, INTEGER, FLOAT, TEXT, DATE)
NUMERIC_KINDS = (INTEGER, FLOAT)

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def tag_of(value: Any) -> str:
    """Type tag of a single cell value.

    Raises :class:`TypeMismatch` for anything outside the cell model.
    ``bool`` is checked before ``int`` (it subclasses int in Python) and
    ``datetime.datetime`` is rejected: cells hold calendar dates only.
    """
    if value is None:
        return NULL
    if isinstance(value, bool):
        return BOOLEAN
    if isinstance(value, int):
        return INTEGER
    if isinstance(value, float):
        return FLOAT
    if isinstance(value, str):
        return TEXT
    if isinstance(value, dt.date) and not isinstance(value, dt.datetime):
        return DATE
    raise TypeMismatch(f"unsupported cell type {type(value).__name__!r}")


def _rel_diff(a: float, b: float) -> float:
    m = max(abs(a), abs(b))
    return abs(a - b) / m if m else 0.0


def compare_values(a: Any, b: Any, float_tol: float = 0.0) -> int:
    """Three-way comparison of two cells: -1, 0 or +1.

    Total order within a tag; null sorts before every non-null value;
    comparing different non-null tags raises :class:`TypeMismatch` (a
    schema bug upstream, never a silent coercion). Two floats compare
    equal when their relative difference is at most ``float_tol``.
    """
    ta, tb = tag_of(a), tag_of(b)
    if ta == NULL or tb == NULL:
        if ta == tb:
            return 0
        return -1 if ta == NULL else 1
    if ta != tb:
        raise TypeMismatch(f"cannot compare {ta} with {tb}", tags=(ta, tb))
    if ta == FLOAT and float_tol > 0.0 and _rel_diff(a, b) <= float_tol:
        return 0
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def format_cell(value: Any) -> str:
    """Canonical text form of a cell (used by CSV output, labels, keys)."""
    tag = tag_of(value)
    if tag == NULL:
        return "∅"
    if tag == BOOLEAN:
        return "true" if value else "false"
    if tag == FLOAT:
        return repr(value)
    if tag == DATE:
        return value.isoformat()
    return str(value)


_KIND_SHORT = {BOOLEAN: "bool", INTEGER: "int", FLOAT: "float", TEXT: "text", DATE: "date"}
_SHORT_KIND = {v: k for k, v in _KIND_SHORT.items()}
_SHORT_KIND.update({k: k for k in KINDS})
_SHORT_KIND["boolean"] = BOOLEAN
_SHORT_KIND["integer"] = INTEGER


@dataclass(frozen=True)
class DataType:
    """Declared type of a column: a kind plus a nullability flag."""

    kind: str
    nullable: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TypeMismatch(f"unknown dtype kind {self.kind!r}")

    @property
    def numeric(self) -> bool:
        return self.kind in NUMERIC_KINDS

    def short(self) -> str:
        base = _KIND_SHORT[self.kind]
        return base if not self.nullable else base + "?"

    @staticmethod
    def parse(text: str, nullable: bool = True) -> "DataType":
        """Parse ``int``/``integer``/``float``/``text``/``bool``/``date``."""
        name = text.strip().lower().rstrip("?")
        if name not in _SHORT_KIND:
            raise TypeMismatch(f"unknown dtype {text!r}")
        if text.strip().endswith("?"):
            nullable = True
        return DataType(_SHORT_KIND[name], nullable)


def check_cell(value: Any, dtype: DataType, context: str = "") -> None:
    """Validate one cell against a column dtype; raises TypeMismatch."""
    tag = tag_of(value)
    where = f" in {context}" if context else ""
    if tag == NULL:
        if not dtype.nullable:
            raise TypeMismatch(f"null{where} but column is non-nullable")
        return
    if tag != dtype.kind:
        raise TypeMismatch(
            f"{tag} value {value!r}{where} does not match column kind {dtype.kind}",
            tags=(tag, dtype.kind),
        )
    if tag == INTEGER and not (INT64_MIN <= value <= INT64_MAX):
        raise TypeMismatch(f"integer {value}{where} outside 64-bit signed range")
    if tag == FLOAT and (value != value or value in (float("inf"), float("-inf"))):
        raise TypeMismatch(f"non-finite float{where}; cells must be finite")


@dataclass(frozen=True)
class Column:
    """A named, typed, fixed-length sequence of cells."""

    name: str
    dtype: DataType
    cells: tuple = ()

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise TypeMismatch("column names must be non-empty text")
        if not isinstance(self.cells, tuple):
            object.__setattr__(self, "cells", tuple(self.cells))
        for cell in self.cells:
            check_cell(cell, self.dtype, context=f"column {self.name!r}")

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def has_null(self) -> bool:
        return any(c is None for c in self.cells)


@dataclass(frozen=True)
class Table:
    """Ordered collection of equally long named columns.

    Row order is significant: tables are ordered multisets of rows.
    ``attribution`` optionally records where the data came from.
    ``bare_rows`` carries the row count of the degenerate zero-column
    table (e.g. after deleting the last column) and is ignored otherwise.
    """

    columns: tuple = ()
    attribution: Optional[str] = None
    bare_rows: int = 0

    def __post_init__(self):
        if not isinstance(self.columns, tuple):
            object.__setattr__(self, "columns", tuple(self.columns))
        seen = set()
        for col in self.columns:
            if col.name in seen:
                raise DuplicateColumn(f"duplicate column name {col.name!r}")
            seen.add(col.name)
        lengths = {len(col) for col in self.columns}
        if len(lengths) > 1:
            raise ArityMismatch(f"columns differ in length: {sorted(lengths)}")
        if self.columns:
            object.__setattr__(self, "bare_rows", 0)

    # -- construction -------------------------------------------------

    @staticmethod
    def build(
        schema: Sequence[tuple],
        rows: Sequence[Sequence[Any]],
        attribution: Optional[str] = None,
    ) -> "Table":
        """Build a table from ``[(name, dtype), ...]`` and row tuples."""
        rows = list(rows)
        for row_no, row in enumerate(rows):
            if len(row) != len(schema):
                raise ArityMismatch(
                    f"row {row_no} has {len(row)} values for {len(schema)} columns"
                )
        cols = tuple(
            Column(name, dtype, tuple(row[i] for row in rows))
            for i, (name, dtype) in enumerate(schema)
        )
        return Table(cols, attribution, bare_rows=0 if schema else len(rows))

    # -- shape --------------------------------------------------------

    @cached_property
    def _index(self) -> dict:
        return {col.name: i for i, col in enumerate(self.columns)}

    @property
    def row_count(self) -> int:
        return len(self.columns[0]) if self.columns else self.bare_rows

    @property
    def width(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> tuple:
        return tuple(col.name for col in self.columns)

    def schema(self) -> tuple:
        return tuple((col.name, col.dtype) for col in self.columns)

    def has_column(self, name: str) -> bool:
        return name in self._index

    def col_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownColumn(
                f"no column {name!r}; available: {list(self.names)}"
            ) from None

    def column(self, name: str) -> Column:
        return self.columns[self.col_index(name)]

    def cell(self, name: str, row: int) -> Any:
        return self.column(name).cells[row]

    def row(self, i: int) -> tuple:
        if not 0 <= i < self.row_count:
            raise IndexOutOfRange(f"row index {i} out of range 0..{self.row_count - 1}")
        return tuple(col.cells[i] for col in self.columns)

    def rows(self) -> Iterator[tuple]:
        if not self.columns:
            return iter([()] * self.bare_rows)
        return iter(zip(*(col.cells for col in self.columns)))

    def row_dicts(self) -> Iterator[dict]:
        names = self.names
        for row in self.rows():
            yield dict(zip(names, row))

    # -- derived tables -----------------------------------------------

    def with_attribution(self, attribution: Optional[str]) -> "Table":
        return replace(self, attribution=attribution)

    def take_rows(self, indices: Sequence[int]) -> "Table":
        """New table containing the given rows in the given order."""
        cols = tuple(
            replace(col, cells=tuple(col.cells[i] for i in indices))
            for col in self.columns
        )
        return Table(cols, self.attribution, bare_rows=0 if cols else len(indices))


def schema_kinds(t: Table) -> frozenset:
    """Schema as a set of (name, kind) pairs; nullability is metadata."""
    return frozenset((col.name, col.dtype.kind) for col in t.columns)


def row_multiset_equal(a: Table, b: Table, float_tol: float = 0.0) -> bool:
    """True iff schemas match by (name, kind) and row multisets are equal.

    Ignores column order, row order and nullability flags. With a zero
    tolerance rows are matched exactly by hashing; a positive tolerance
    falls back to quadratic greedy matching so approximately equal floats
    can pair up.
    """
    if schema_kinds(a) != schema_kinds(b):
        return False
    if a.row_count != b.row_count:
        return False
    order = [b.col_index(name) for name in a.names]
    b_rows = [tuple(row[i] for i in order) for row in b.rows()]
    a_rows = list(a.rows())
    if float_tol == 0.0:
        return Counter(a_rows) == Counter(b_rows)
    remaining = list(b_rows)
    for row in a_rows:
        for j, cand in enumerate(remaining):
            if all(
                compare_values(x, y, float_tol) == 0 for x, y in zip(row, cand)
            ):
                del remaining[j]
                break
        else:
            return False
    return True


class Environment:
    """Session-scoped, single-writer map of handle names to tables.

    Rebinding a handle installs a new table version; existing Table
    objects are never mutated. Mutations must be serialized per session;
    the tables themselves are safe to share across concurrent readers.
    """

    def __init__(self) -> None:
        self._bindings: dict = {}
        self._versions: dict = {}
        self.next_version = 1

    def bind(self, handle: str, table: Table) -> int:
        """Bind or rebind a handle; returns the handle's new version."""
        if not handle:
            raise UnknownHandle("handle names must be non-empty")
        version = self._versions.get(handle, 0) + 1
        self._versions[handle] = version
        self._bindings[handle] = table
        self.next_version += 1
        return version

    def lookup(self, handle: str) -> Table:
        try:
            return self._bindings[handle]
        except KeyError:
            raise UnknownHandle(
                f"no table bound to {handle!r}; bound: {list(self._bindings)}"
            ) from None

    def unbind(self, handle: str) -> Table:
        if handle not in self._bindings:
            raise UnknownHandle(f"no table bound to {handle!r}")
        return self._bindings.pop(handle)

    def is_bound(self, handle: str) -> bool:
        return handle in self._bindings

    def version_of(self, handle: str) -> int:
        return self._versions.get(handle, 0)

    def handles(self) -> list:
        return list(self._bindings)

    def items(self) -> list:
        return list(self._bindings.items())

    def __len__(self) -> int:
        return len(self._bindings)

    def __contains__(self, handle: str) -> bool:
        return handle in self._bindings


RowSelector = Union[Sequence[int], "object"]


def resolve_selector(t: Table, selector: Any) -> list:
    """Resolve a row selector (index set or predicate) to sorted indices."""
    from .expr import Expr, eval_predicate

    if isinstance(selector, Expr):
        return [
            i for i in range(t.row_count) if eval_predicate(selector, t, i) is True
        ]
    indices = sorted(set(int(i) for i in selector))
    for i in indices:
        if not 0 <= i < t.row_count:
            raise IndexOutOfRange(
                f"row index {i} out of range for {t.row_count}-row table"
            )
    return indices

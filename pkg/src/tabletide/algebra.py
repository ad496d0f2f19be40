"""The 21-operation multi-table wrangling algebra.

Operations are grouped in five classes by input/output cardinality:
create (0:1), delete (1:0), transform (1:1), separate (1:N) and
combine (N:1), each applying to tables, columns or rows. All functions
are pure: inputs are immutable tables and a new table is always built.

Operations that can surface audit findings return an :class:`OpResult`
pairing their output tables with :class:`~tabletide.audit.Diagnostic`
records; purely structural operations return tables directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

from . import audit
from .errors import (
    AllNullGroup,
    ArityMismatch,
    BadBinSpec,
    ColumnNameCollision,
    DuplicateColumn,
    DuplicateKeyPair,
    DuplicateRightKey,
    KeyInRightSet,
    MissingBinSpec,
    MixedDtypes,
    NameCollision,
    NoRowSelected,
    NotAPermutation,
    NotNumeric,
    NotText,
    SchemaMismatch,
    TypeMismatch,
    UnknownColumn,
)
from .model import (
    BOOLEAN,
    DATE,
    FLOAT,
    INTEGER,
    TEXT,
    Column,
    DataType,
    Environment,
    Table,
    check_cell,
    compare_values,
    format_cell,
    resolve_selector,
    tag_of,
)
from .expr import Expr, Lit, eval_expr, eval_predicate

STRICT = "strict"
UNION = "union"

AGG_FUNCTIONS = ("count", "sum", "mean", "min", "max", "first")


@dataclass(frozen=True)
class SchemaPolicy:
    """How ``extend`` reconciles schemas: strict match or null-filled union."""

    mode: str = STRICT

    def __post_init__(self):
        if self.mode not in (STRICT, UNION):
            raise SchemaMismatch(f"unknown schema policy {self.mode!r}")


@dataclass(frozen=True)
class Aggregator:
    """An aggregate function and its target column (count takes none)."""

    function: str
    target: Optional[str] = None

    def __post_init__(self):
        if self.function not in AGG_FUNCTIONS:
            raise TypeMismatch(f"unknown aggregate {self.function!r}")
        if self.function == "count" and self.target is not None:
            raise TypeMismatch("count takes no target column")
        if self.function != "count" and self.target is None:
            raise TypeMismatch(f"{self.function} needs a target column")


@dataclass(frozen=True)
class BinSpec:
    """Equal-width bins for decomposing a numeric column.

    ``k`` half-open bins over [low, high], last bin closed. Bounds default
    to the observed range of the column.
    """

    k: int
    low: Optional[float] = None
    high: Optional[float] = None

    def __post_init__(self):
        if self.k < 1:
            raise BadBinSpec(f"bin count must be >= 1, got {self.k}")
        if self.low is not None and self.high is not None and self.low > self.high:
            raise BadBinSpec(f"bin range [{self.low}, {self.high}] is inverted")


@dataclass(frozen=True)
class OpResult:
    """Labeled output tables plus the diagnostics the operation raised."""

    tables: tuple  # of (label, Table)
    diagnostics: tuple = ()

    def __post_init__(self):
        labels = [label for label, _ in self.tables]
        if len(labels) != len(set(labels)):
            raise NameCollision(f"duplicate output labels: {labels}")

    @property
    def table(self) -> Table:
        """The single output table (raises if there are several)."""
        if len(self.tables) != 1:
            raise ArityMismatch(f"expected one output, have {len(self.tables)}")
        return self.tables[0][1]


def _sorted_cells(values) -> list:
    """Sort a list of same-tag cells with nulls first (for payload lists)."""
    import functools

    return sorted(set(values), key=functools.cmp_to_key(compare_values))


def _infer_kind(cells: Sequence[Any], fallback: str, context: str) -> str:
    """Kind shared by all non-null cells; falls back when all are null."""
    kinds = {tag_of(c) for c in cells if c is not None}
    if not kinds:
        return fallback
    if len(kinds) > 1:
        raise TypeMismatch(
            f"{context} produced mixed kinds {sorted(kinds)}", tags=tuple(sorted(kinds))
        )
    return kinds.pop()


def _column_from_cells(name: str, cells: Sequence[Any], fallback_kind: str, context: str) -> Column:
    kind = _infer_kind(cells, fallback_kind, context)
    return Column(name, DataType(kind, any(c is None for c in cells)), tuple(cells))


# ===========================================================================
# Create class (0:1)
# ===========================================================================


def create_table(
    schema: Sequence[Tuple[str, DataType]],
    rows: Sequence[Sequence[Any]] = (),
    attribution: Optional[str] = None,
) -> Table:
    """Create a table directly in the wrangling environment."""
    return Table.build(list(schema), list(rows), attribution)


def create_column(t: Table, name: str, dtype: DataType, generator: Union[Expr, Any]) -> Table:
    """Add one column, filled by a constant or a row-scoped expression."""
    if t.has_column(name):
        raise DuplicateColumn(f"table already has a column {name!r}")
    gen = generator if isinstance(generator, Expr) else Lit(generator)
    cells = tuple(eval_expr(gen, t, i) for i in range(t.row_count))
    col = Column(name, dtype, cells)
    return Table(t.columns + (col,), t.attribution)


def create_row(t: Table, row: Sequence[Any]) -> Table:
    """Append one row, e.g. a manually constructed missing observation."""
    if len(row) != t.width:
        raise ArityMismatch(f"row has {len(row)} values for {t.width} columns")
    cols = tuple(
        replace(col, cells=col.cells + (value,))
        for col, value in zip(t.columns, row)
    )
    return Table(cols, t.attribution)


# ===========================================================================
# Delete class (1:0)
# ===========================================================================


def delete_table(env: Environment, handle: str) -> Environment:
    """Unbind a table from the environment (provenance keeps a tombstone)."""
    env.unbind(handle)
    return env


def delete_column(t: Table, name: str) -> Table:
    """Drop one column; the degenerate zero-column table keeps its rows."""
    idx = t.col_index(name)
    cols = t.columns[:idx] + t.columns[idx + 1 :]
    return Table(cols, t.attribution, bare_rows=0 if cols else t.row_count)


def delete_row(t: Table, selector: Any) -> Table:
    """Remove the selected rows; the remaining order is preserved."""
    drop = set(resolve_selector(t, selector))
    keep = [i for i in range(t.row_count) if i not in drop]
    return t.take_rows(keep)


# ===========================================================================
# Transform class (1:1)
# ===========================================================================


def rearrange(
    t: Table,
    sort_keys: Sequence[Tuple[str, str]] = (),
    column_order: Optional[Sequence[str]] = None,
) -> Table:
    """Stably sort rows and/or reorder columns; cell multiset unchanged."""
    import functools

    for name, direction in sort_keys:
        t.col_index(name)
        if direction not in ("asc", "desc"):
            raise TypeMismatch(f"sort direction must be asc or desc, got {direction!r}")
    out = t
    if sort_keys:
        key_cols = [(t.col_index(name), direction) for name, direction in sort_keys]

        def cmp(i: int, j: int) -> int:
            for idx, direction in key_cols:
                a = t.columns[idx].cells[i]
                b = t.columns[idx].cells[j]
                if a is None or b is None:
                    # Nulls sort first regardless of direction.
                    base = 0 if (a is None and b is None) else (-1 if a is None else 1)
                else:
                    base = compare_values(a, b)
                    if direction == "desc":
                        base = -base
                if base:
                    return base
            return 0

        order = sorted(range(t.row_count), key=functools.cmp_to_key(cmp))
        out = t.take_rows(order)
    if column_order is not None:
        if sorted(column_order) != sorted(t.names) or len(column_order) != t.width:
            raise NotAPermutation(
                f"{list(column_order)} is not a permutation of {list(t.names)}"
            )
        cols = tuple(out.column(name) for name in column_order)
        out = Table(cols, out.attribution)
    return out


def reshape_fold(
    t: Table, value_columns: Sequence[str], key_name: str, value_name: str
) -> Table:
    """Collapse value columns into key-value rows (melt to tidy format)."""
    value_set = list(dict.fromkeys(value_columns))
    if not value_set:
        raise ArityMismatch("fold needs at least one value column")
    for name in value_set:
        t.col_index(name)
    folded = [t.column(name) for name in sorted(value_set, key=t.col_index)]
    kinds = {col.dtype.kind for col in folded}
    if len(kinds) > 1:
        raise MixedDtypes(f"folded columns mix kinds {sorted(kinds)}")
    kept = [col for col in t.columns if col.name not in value_set]
    for fresh in (key_name, value_name):
        if any(col.name == fresh for col in kept):
            raise NameCollision(f"name {fresh!r} collides with a retained column")
    if key_name == value_name:
        raise NameCollision("key and value names must differ")
    out_rows = []
    for i in range(t.row_count):
        for col in folded:
            out_rows.append(
                tuple(k.cells[i] for k in kept) + (col.name, col.cells[i])
            )
    value_kind = kinds.pop() if kinds else folded[0].dtype.kind
    schema = [(col.name, col.dtype) for col in kept]
    schema.append((key_name, DataType(TEXT, nullable=False)))
    schema.append(
        (value_name, DataType(value_kind, any(c.dtype.nullable or c.has_null for c in folded)))
    )
    return Table.build(schema, out_rows, t.attribution)


def reshape_unfold(t: Table, key_column: str, value_column: str) -> Table:
    """Cast key levels back out as columns (cross-tabulate)."""
    key_col = t.column(key_column)
    value_col = t.column(value_column)
    if key_col.dtype.kind != TEXT:
        raise NotText(f"key column {key_column!r} must be text, is {key_col.dtype.kind}")
    id_cols = [c for c in t.columns if c.name not in (key_column, value_column)]
    id_names = [c.name for c in id_cols]

    levels: list = []
    id_order: list = []
    cells: dict = {}
    seen_pairs = set()
    duplicates = []
    for i in range(t.row_count):
        ident = tuple(c.cells[i] for c in id_cols)
        level = key_col.cells[i]
        label = level if level is not None else "∅"
        if (ident, label) in seen_pairs:
            duplicates.append((ident, label))
            continue
        seen_pairs.add((ident, label))
        if label not in levels:
            levels.append(label)
        if ident not in id_order:
            id_order.append(ident)
        cells[(ident, label)] = value_col.cells[i]
    if duplicates:
        raise DuplicateKeyPair(
            f"{len(duplicates)} duplicate (identifier, level) pairs, first: {duplicates[0]}",
            pairs=duplicates,
        )
    for label in levels:
        if label in id_names:
            raise NameCollision(f"level {label!r} collides with an identifier column")
    any_missing = len(cells) < len(id_order) * len(levels)
    schema = [(c.name, c.dtype) for c in id_cols]
    for label in levels:
        nullable = value_col.dtype.nullable or value_col.has_null or any_missing
        schema.append((label, DataType(value_col.dtype.kind, nullable)))
    rows = [
        ident + tuple(cells.get((ident, label)) for label in levels)
        for ident in id_order
    ]
    return Table.build(schema, rows, t.attribution)


def transform_column(
    t: Table, column: str, mapping: Union[Expr, Mapping[Any, Any]]
) -> OpResult:
    """Replace a column cell-wise via an expression or a value lookup.

    A lookup leaves unmapped non-null values unchanged and reports them
    in an ``UnmappedLookupValues`` diagnostic.
    """
    idx = t.col_index(column)
    old = t.columns[idx]
    diagnostics: list = []
    if isinstance(mapping, Expr):
        cells = tuple(eval_expr(mapping, t, i) for i in range(t.row_count))
    else:
        table = dict(mapping)
        unmapped = []
        out = []
        for cell in old.cells:
            if cell in table:
                out.append(table[cell])
            else:
                out.append(cell)
                if cell is not None:
                    unmapped.append(cell)
        cells = tuple(out)
        if unmapped:
            diagnostics.append(
                audit.Diagnostic(
                    kind=audit.UNMAPPED_LOOKUP_VALUES,
                    severity=audit.INFO,
                    payload={
                        "column": column,
                        "values": _sorted_cells(unmapped),
                        "rows": len(unmapped),
                    },
                )
            )
    new_col = _column_from_cells(column, cells, old.dtype.kind, f"transform of {column!r}")
    cols = t.columns[:idx] + (new_col,) + t.columns[idx + 1 :]
    return OpResult((("result", Table(cols, t.attribution)),), tuple(diagnostics))


def transform_row(t: Table, selector: Any, edits: Mapping[str, Any]) -> Table:
    """Patch cells of the selected rows (manual edits, imputation)."""
    indices = resolve_selector(t, selector)
    if not indices:
        raise NoRowSelected("row selector matched no rows")
    for name, value in edits.items():
        check_cell(value, replace(t.column(name).dtype, nullable=True), context=f"edit of {name!r}")
    hit = set(indices)
    cols = []
    for col in t.columns:
        if col.name in edits:
            value = edits[col.name]
            cells = tuple(
                value if i in hit else c for i, c in enumerate(col.cells)
            )
            nullable = col.dtype.nullable or value is None
            cols.append(Column(col.name, replace(col.dtype, nullable=nullable), cells))
        else:
            cols.append(col)
    return Table(tuple(cols), t.attribution)


# ===========================================================================
# Separate class (1:N)
# ===========================================================================


def subset(t: Table, predicate: Expr) -> Tuple[Table, Table]:
    """Divide a table row-wise into (matching, rest).

    Rows where the predicate is null go to ``rest``: null is a non-match.
    Both halves preserve input order and schema.
    """
    matching, rest = [], []
    for i in range(t.row_count):
        (matching if eval_predicate(predicate, t, i) is True else rest).append(i)
    return t.take_rows(matching), t.take_rows(rest)


def _bin_label(low: float, high: float, closed: bool) -> str:
    bracket = "]" if closed else ")"
    return f"[{format_cell(low)}, {format_cell(high)}{bracket}"


def decompose(
    t: Table, column: str, bins: Optional[BinSpec] = None
) -> List[Tuple[str, Table]]:
    """Partition a table into constituent tables by one column's values.

    Text/date columns produce one table per distinct level in first-
    appearance order; booleans always produce the pair true, false;
    numeric columns require a :class:`BinSpec` and produce one table per
    bin. Null cells form an extra part labeled "∅".
    """
    col = t.column(column)
    kind = col.dtype.kind
    if kind in (INTEGER, FLOAT):
        if bins is None:
            raise MissingBinSpec(f"numeric column {column!r} needs a bin spec")
        return _decompose_binned(t, col, bins)
    if bins is not None:
        raise BadBinSpec(f"bins only apply to numeric columns, {column!r} is {kind}")
    groups: dict = {}
    order: list = []
    if kind == BOOLEAN:
        for label in ("true", "false"):
            groups[label] = []
            order.append(label)
    for i, cell in enumerate(col.cells):
        label = format_cell(cell)
        if label not in groups:
            groups[label] = []
            order.append(label)
        groups[label].append(i)
    return [(label, t.take_rows(groups[label])) for label in order]


def _decompose_binned(t: Table, col: Column, bins: BinSpec) -> List[Tuple[str, Table]]:
    values = [c for c in col.cells if c is not None]
    low = bins.low if bins.low is not None else (min(values) if values else 0.0)
    high = bins.high if bins.high is not None else (max(values) if values else 1.0)
    low, high = float(low), float(high)
    for v in values:
        if not (low <= v <= high):
            raise BadBinSpec(
                f"value {v!r} outside bin range [{low}, {high}] for {col.name!r}"
            )
    width = (high - low) / bins.k
    edges = [low + i * width for i in range(bins.k)] + [high]
    parts: list = [[] for _ in range(bins.k)]
    nulls: list = []
    for i, cell in enumerate(col.cells):
        if cell is None:
            nulls.append(i)
            continue
        if width > 0:
            b = min(bins.k - 1, int((float(cell) - low) / width))
            # Guard right edges of half-open bins against float rounding.
            while b + 1 < bins.k and float(cell) >= edges[b + 1]:
                b += 1
            while b > 0 and float(cell) < edges[b]:
                b -= 1
        else:
            b = bins.k - 1
        parts[b].append(i)
    out = [
        (_bin_label(edges[i], edges[i + 1], closed=(i == bins.k - 1)), t.take_rows(parts[i]))
        for i in range(bins.k)
    ]
    if nulls:
        out.append(("∅", t.take_rows(nulls)))
    return out


def split(t: Table, key_column: str, right_columns: Sequence[str]) -> Tuple[Table, Table]:
    """Divide a table column-wise; the key column remains in both halves."""
    t.col_index(key_column)
    right_set = list(dict.fromkeys(right_columns))
    if key_column in right_set:
        raise KeyInRightSet(f"key column {key_column!r} cannot be in the right set")
    for name in right_set:
        t.col_index(name)
    left_cols = tuple(
        col for col in t.columns if col.name not in right_set
    )
    right_cols = (t.column(key_column),) + tuple(
        col for col in t.columns if col.name in right_set
    )
    return Table(left_cols, t.attribution), Table(right_cols, t.attribution)


def separate_column(
    t: Table,
    column: str,
    splitter: Union[str, Sequence[int]],
    new_names: Sequence[str],
) -> OpResult:
    """Split a composite text column into atomic components.

    With a delimiter, surplus parts fold into the last component and
    missing parts become null; fixed positions cut at character offsets.
    Rows that do not yield exactly the expected parts are counted in an
    ``IrregularSeparation`` diagnostic.
    """
    idx = t.col_index(column)
    col = t.columns[idx]
    if col.dtype.kind != TEXT:
        raise NotText(f"column {column!r} must be text, is {col.dtype.kind}")
    names = list(new_names)
    if not names:
        raise ArityMismatch("need at least one component name")
    if len(set(names)) != len(names):
        raise NameCollision(f"duplicate component names {names}")
    other = [c.name for c in t.columns if c.name != column]
    for name in names:
        if name in other:
            raise NameCollision(f"component name {name!r} collides with a column")
    n = len(names)
    positions: Optional[List[int]] = None
    if not isinstance(splitter, str):
        positions = [int(p) for p in splitter]
        if positions != sorted(positions) or any(p <= 0 for p in positions):
            raise BadBinSpec(f"cut positions must be positive and ascending: {positions}")
        if len(positions) != n - 1:
            raise ArityMismatch(
                f"{len(positions)} cut positions yield {len(positions) + 1} parts for {n} names"
            )
    elif not splitter:
        raise NotText("delimiter must be non-empty")

    short_rows: list = []
    overflow_rows: list = []
    parts_per_row = []
    for i, cell in enumerate(col.cells):
        if cell is None:
            parts_per_row.append((None,) * n)
            continue
        if positions is None:
            full = cell.split(splitter)
            if len(full) > n:
                overflow_rows.append(i)
            parts = cell.split(splitter, n - 1)
            if len(parts) < n:
                short_rows.append(i)
                parts = parts + [None] * (n - len(parts))
        else:
            bounds = [0] + positions + [None]
            parts = []
            for j in range(n):
                start = bounds[j]
                end = bounds[j + 1]
                if start > len(cell):
                    parts.append(None)
                else:
                    parts.append(cell[start:end] if end is not None else cell[start:])
            if any(p is None for p in parts):
                short_rows.append(i)
        parts_per_row.append(tuple(parts))
    new_cols = []
    for j, name in enumerate(names):
        cells = tuple(parts[j] for parts in parts_per_row)
        nullable = col.dtype.nullable or any(c is None for c in cells)
        new_cols.append(Column(name, DataType(TEXT, nullable), cells))
    cols = t.columns[:idx] + tuple(new_cols) + t.columns[idx + 1 :]
    diagnostics = []
    if short_rows or overflow_rows:
        diagnostics.append(
            audit.Diagnostic(
                kind=audit.IRREGULAR_SEPARATION,
                severity=audit.INFO,
                payload={
                    "column": column,
                    "short_rows": sorted(set(short_rows)),
                    "overflow_rows": sorted(set(overflow_rows)),
                    "rows": len(set(short_rows) | set(overflow_rows)),
                },
            )
        )
    return OpResult((("result", Table(cols, t.attribution)),), tuple(diagnostics))


def separate_row(t: Table, column: str, delimiter: str) -> Table:
    """Explode delimited cells into one row per element.

    A null or empty cell yields a single row with a null in its place;
    all other cells repeat alongside each element.
    """
    idx = t.col_index(column)
    col = t.columns[idx]
    if col.dtype.kind != TEXT:
        raise NotText(f"column {column!r} must be text, is {col.dtype.kind}")
    if not delimiter:
        raise NotText("delimiter must be non-empty")
    out_rows = []
    for i in range(t.row_count):
        row = t.row(i)
        cell = row[idx]
        elements = [None] if (cell is None or cell == "") else cell.split(delimiter)
        for element in elements:
            out_rows.append(row[:idx] + (element,) + row[idx + 1 :])
    nullable = col.dtype.nullable or any(r[idx] is None for r in out_rows)
    schema = [
        (c.name, c.dtype if c.name != column else DataType(TEXT, nullable))
        for c in t.columns
    ]
    return Table.build(schema, out_rows, t.attribution)


# ===========================================================================
# Combine class (N:1)
# ===========================================================================


def _align_kinds(tables: Sequence[Table]) -> None:
    kinds: dict = {}
    for t in tables:
        for col in t.columns:
            seen = kinds.setdefault(col.name, col.dtype.kind)
            if seen != col.dtype.kind:
                raise SchemaMismatch(
                    f"column {col.name!r} is {seen} in one table and {col.dtype.kind} in another"
                )


def extend(tables: Sequence[Table], policy: SchemaPolicy = SchemaPolicy()) -> OpResult:
    """Concatenate tables row-wise (a UNION across the environment).

    Strict mode requires identical (name, kind) column sets. Union mode
    takes all columns, fills the gaps with nulls and reports schema drift
    per table, including categorical levels unseen in earlier tables.
    """
    tables = list(tables)
    if len(tables) < 2:
        raise ArityMismatch(f"extend needs at least two tables, got {len(tables)}")
    _align_kinds(tables)
    base = tables[0]
    base_names = set(base.names)
    if policy.mode == STRICT:
        for i, t in enumerate(tables[1:], start=2):
            if set(t.names) != base_names:
                missing = sorted(base_names - set(t.names))
                extra = sorted(set(t.names) - base_names)
                raise SchemaMismatch(
                    f"table {i} schema differs under strict policy "
                    f"(missing {missing}, extra {extra})"
                )
        all_names = list(base.names)
    else:
        all_names = list(base.names)
        for t in tables[1:]:
            for name in t.names:
                if name not in all_names:
                    all_names.append(name)

    drift_entries = []
    seen_levels: dict = {}
    for i, t in enumerate(tables):
        missing = sorted(n for n in all_names if not t.has_column(n))
        extra = sorted(n for n in t.names if n not in base_names) if i else []
        new_levels: dict = {}
        for col in t.columns:
            if col.dtype.kind != TEXT:
                continue
            seen = seen_levels.setdefault(col.name, set())
            fresh = sorted({c for c in col.cells if c is not None} - seen)
            if fresh and i > 0:
                new_levels[col.name] = fresh
            seen.update(fresh)
        if i > 0 and (missing or extra or new_levels):
            drift_entries.append(
                {"table": i, "missing": missing, "extra": extra, "new_levels": new_levels}
            )

    out_cols = []
    for name in all_names:
        cells: list = []
        kind = None
        nullable = False
        for t in tables:
            if t.has_column(name):
                col = t.column(name)
                kind = col.dtype.kind
                nullable = nullable or col.dtype.nullable or col.has_null
                cells.extend(col.cells)
            else:
                cells.extend([None] * t.row_count)
                nullable = True
        out_cols.append(Column(name, DataType(kind, nullable), tuple(cells)))
    diagnostics = ()
    if policy.mode == UNION and drift_entries:
        diagnostics = (
            audit.Diagnostic(
                kind=audit.SCHEMA_DRIFT,
                severity=audit.WARNING,
                payload={"tables": drift_entries},
            ),
        )
    return OpResult((("result", Table(tuple(out_cols))),), diagnostics)


def _check_join_inputs(left: Table, right: Table, key: str, unique_right: bool):
    left.col_index(key)
    right.col_index(key)
    lk, rk = left.column(key).dtype.kind, right.column(key).dtype.kind
    if lk != rk:
        raise TypeMismatch(f"key {key!r} is {lk} on the left and {rk} on the right")
    shared = (set(left.names) & set(right.names)) - {key}
    if shared:
        raise ColumnNameCollision(
            f"non-key columns {sorted(shared)} exist on both sides"
        )
    right_map: dict = {}
    if unique_right:
        dupes = []
        for i, cell in enumerate(right.column(key).cells):
            if cell in right_map:
                dupes.append(cell)
            else:
                right_map[cell] = i
        if dupes:
            raise DuplicateRightKey(
                f"right keys not unique: {_sorted_cells(dupes)}", keys=_sorted_cells(dupes)
            )
    else:
        for i, cell in enumerate(right.column(key).cells):
            right_map.setdefault(cell, i)
    return right_map


def supplement(left: Table, right: Table, key: str) -> OpResult:
    """Left-preserving column merge on a key with bijective intent.

    Every left row is retained exactly once; unmatched left rows are
    null-filled and reported, as are right rows that never matched.
    """
    right_map = _check_join_inputs(left, right, key, unique_right=True)
    right_value_cols = [c for c in right.columns if c.name != key]
    unmatched = []
    used = set()
    appended: list = [[] for _ in right_value_cols]
    for cell in left.column(key).cells:
        # Null keys never match; they surface as unmatched left rows.
        hit = right_map.get(cell) if cell is not None else None
        if hit is None:
            unmatched.append(cell)
            for acc in appended:
                acc.append(None)
        else:
            used.add(hit)
            for acc, col in zip(appended, right_value_cols):
                acc.append(col.cells[hit])
    unused = [
        cell
        for i, cell in enumerate(right.column(key).cells)
        if i not in used
    ]
    cols = list(left.columns)
    for col, cells in zip(right_value_cols, appended):
        nullable = col.dtype.nullable or any(c is None for c in cells)
        cols.append(Column(col.name, DataType(col.dtype.kind, nullable), tuple(cells)))
    diagnostics = []
    if unmatched:
        diagnostics.append(
            audit.Diagnostic(
                kind=audit.UNMATCHED_LEFT_KEYS,
                severity=audit.WARNING,
                payload={
                    "key_column": key,
                    "keys": _sorted_cells(unmatched),
                    "rows": len(unmatched),
                },
            )
        )
    if unused:
        diagnostics.append(
            audit.Diagnostic(
                kind=audit.UNUSED_RIGHT_KEYS,
                severity=audit.INFO,
                payload={
                    "key_column": key,
                    "keys": _sorted_cells(unused),
                    "rows": len(unused),
                },
            )
        )
    return OpResult((("result", Table(tuple(cols))),), tuple(diagnostics))


def match_join(left: Table, right: Table, key: str, mode: str = "inner") -> OpResult:
    """Inner/semi/anti join with explicit reporting of excluded rows.

    Whatever the mode, any left rows absent from the output are listed in
    a ``LossyJoin`` diagnostic, so nothing is dropped unknowingly.
    """
    if mode not in ("inner", "semi", "anti"):
        raise TypeMismatch(f"unknown match mode {mode!r}")
    right_map = _check_join_inputs(left, right, key, unique_right=(mode == "inner"))
    matched_rows = []
    excluded = []
    for i, cell in enumerate(left.column(key).cells):
        hit = right_map.get(cell) if cell is not None else None
        if hit is None:
            if mode in ("inner", "semi"):
                excluded.append(cell)
            else:
                matched_rows.append(i)
        else:
            if mode in ("inner", "semi"):
                matched_rows.append(i)
            else:
                excluded.append(cell)
    if mode == "inner":
        kept = left.take_rows(matched_rows)
        cols = list(kept.columns)
        for col in right.columns:
            if col.name == key:
                continue
            cells = tuple(
                col.cells[right_map[left.column(key).cells[i]]] for i in matched_rows
            )
            nullable = col.dtype.nullable or any(c is None for c in cells)
            cols.append(Column(col.name, DataType(col.dtype.kind, nullable), cells))
        out = Table(tuple(cols))
    else:
        out = left.take_rows(matched_rows)
    diagnostics = []
    if excluded:
        diagnostics.append(
            audit.Diagnostic(
                kind=audit.LOSSY_JOIN,
                severity=audit.WARNING,
                payload={
                    "key_column": key,
                    "mode": mode,
                    "dropped_keys": _sorted_cells(excluded),
                    "dropped_rows": len(excluded),
                },
            )
        )
    return OpResult((("result", out),), tuple(diagnostics))


def combine_columns(
    t: Table,
    columns: Sequence[str],
    combiner: Union[str, Expr],
    new_name: str,
) -> Table:
    """Map many columns into one, by separator concatenation or expression.

    The inputs are removed and the combined column takes the first
    input's position. With a separator combiner, any null input makes the
    output null.
    """
    names = list(columns)
    if len(names) < 2:
        raise ArityMismatch("combine needs at least two input columns")
    if len(set(names)) != len(names):
        raise NameCollision(f"duplicate input columns {names}")
    for name in names:
        t.col_index(name)
    survivors = [c.name for c in t.columns if c.name not in names]
    if new_name in survivors:
        raise NameCollision(f"name {new_name!r} collides with a remaining column")
    first_idx = min(t.col_index(name) for name in names)
    if isinstance(combiner, Expr):
        cells = tuple(eval_expr(combiner, t, i) for i in range(t.row_count))
        new_col = _column_from_cells(new_name, cells, TEXT, "column combination")
    else:
        source_cols = [t.column(name) for name in names]
        out = []
        for i in range(t.row_count):
            values = [col.cells[i] for col in source_cols]
            if any(v is None for v in values):
                out.append(None)
            else:
                out.append(combiner.join(format_cell(v) for v in values))
        new_col = Column(new_name, DataType(TEXT, any(c is None for c in out)), tuple(out))
    cols: list = []
    inserted = False
    for i, col in enumerate(t.columns):
        if col.name in names:
            if i == first_idx:
                cols.append(new_col)
                inserted = True
            continue
        cols.append(col)
    if not inserted:
        cols.insert(first_idx, new_col)
    return Table(tuple(cols), t.attribution)


def _aggregate(agg: Aggregator, t: Table, indices: Sequence[int]):
    if agg.function == "count":
        return len(indices)
    col = t.column(agg.target)
    values = [col.cells[i] for i in indices if col.cells[i] is not None]
    if agg.function == "sum":
        if col.dtype.kind == FLOAT:
            return math.fsum(values) if values else 0.0
        return sum(values) if values else 0
    if not values:
        return None
    if agg.function == "mean":
        if col.dtype.kind == FLOAT:
            return math.fsum(values) / len(values)
        return sum(values) / len(values)
    if agg.function == "min":
        return min(values)
    if agg.function == "max":
        return max(values)
    if agg.function == "first":
        return t.column(agg.target).cells[indices[0]]
    raise TypeMismatch(f"unknown aggregate {agg.function!r}")


def _agg_dtype(agg: Aggregator, t: Table) -> DataType:
    if agg.function == "count":
        return DataType(INTEGER, nullable=False)
    kind = t.column(agg.target).dtype.kind
    if agg.function in ("sum", "mean") and kind not in (INTEGER, FLOAT):
        raise TypeMismatch(f"{agg.function} requires a numeric target, {agg.target!r} is {kind}")
    if agg.function == "mean":
        return DataType(FLOAT, nullable=True)
    if agg.function == "sum":
        return DataType(kind, nullable=False)
    return DataType(kind, nullable=True)


def summarize(
    t: Table,
    group_columns: Sequence[str],
    aggs: Sequence[Tuple[Aggregator, str]],
) -> Table:
    """Group rows and aggregate, coarsening the observation granularity.

    Groups appear in first-appearance order; nulls group together. With
    no group columns the whole table forms one group, even when empty
    (count 0, sum 0, every other aggregate null).
    """
    group_names = list(group_columns)
    for name in group_names:
        t.col_index(name)
    out_names = [out for _, out in aggs]
    if len(set(out_names + group_names)) != len(out_names) + len(group_names):
        raise NameCollision(f"output names collide: {group_names + out_names}")
    dtypes = [_agg_dtype(agg, t) for agg, _ in aggs]
    group_cols = [t.column(name) for name in group_names]
    groups: dict = {}
    order: list = []
    if not group_names:
        groups[()] = list(range(t.row_count))
        order.append(())
    else:
        for i in range(t.row_count):
            key = tuple(col.cells[i] for col in group_cols)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(i)
    schema = [(name, t.column(name).dtype) for name in group_names]
    schema += [(out, dtype) for (_, out), dtype in zip(aggs, dtypes)]
    rows = []
    for key in order:
        rows.append(key + tuple(_aggregate(agg, t, groups[key]) for agg, _ in aggs))
    return Table.build(schema, rows, t.attribution)


def interpolate(
    t: Table,
    order_column: Optional[str],
    target_column: str,
    method: str,
    group_columns: Sequence[str] = (),
) -> OpResult:
    """Fill null target cells from neighboring or grouped observations.

    ``linear`` interpolates between the nearest non-null neighbors along
    a numeric or date order column (boundary nulls copy the nearest
    value); ``forward_fill`` copies the previous non-null in order;
    ``group_mean`` fills with the group's mean. Rows are never added or
    removed. Integer targets widen to float under linear and group_mean
    since interpolated values are generally fractional.
    """
    if method not in ("linear", "forward_fill", "group_mean"):
        raise TypeMismatch(f"unknown interpolation method {method!r}")
    idx = t.col_index(target_column)
    target = t.columns[idx]
    if method in ("linear", "group_mean") and target.dtype.kind not in (INTEGER, FLOAT):
        raise NotNumeric(f"target {target_column!r} must be numeric for {method}")
    diagnostics: list = []

    if method == "group_mean":
        for name in group_columns:
            t.col_index(name)
        group_cols = [t.column(name) for name in group_columns]
        groups: dict = {}
        for i in range(t.row_count):
            key = tuple(col.cells[i] for col in group_cols)
            groups.setdefault(key, []).append(i)
        cells = list(target.cells)
        for key, members in groups.items():
            holes = [i for i in members if cells[i] is None]
            if not holes:
                continue
            values = [float(cells[i]) for i in members if cells[i] is not None]
            if not values:
                raise AllNullGroup(
                    f"group {key!r} has no non-null {target_column!r} values to average"
                )
            mean = math.fsum(values) / len(values)
            for i in holes:
                cells[i] = mean
        new_cells = tuple(float(c) if c is not None else None for c in cells)
        new_col = Column(
            target_column,
            DataType(FLOAT, any(c is None for c in new_cells)),
            new_cells,
        )
        cols = t.columns[:idx] + (new_col,) + t.columns[idx + 1 :]
        return OpResult((("result", Table(cols, t.attribution)),), ())

    if order_column is None:
        raise UnknownColumn(f"{method} interpolation needs an order column")
    order_col = t.column(order_column)
    if order_col.has_null:
        raise TypeMismatch(f"order column {order_column!r} contains nulls")
    if method == "linear" and order_col.dtype.kind not in (INTEGER, FLOAT, DATE):
        raise NotNumeric(
            f"order column {order_column!r} must be numeric or date for linear"
        )
    import functools

    perm = sorted(
        range(t.row_count),
        key=functools.cmp_to_key(
            lambda i, j: compare_values(order_col.cells[i], order_col.cells[j])
        ),
    )
    cells = list(target.cells)
    if method == "forward_fill":
        carry = None
        unfilled = []
        for i in perm:
            if cells[i] is None:
                if carry is None:
                    unfilled.append(i)
                else:
                    cells[i] = carry
            else:
                carry = cells[i]
        if carry is None and t.row_count:
            raise AllNullGroup(f"column {target_column!r} has no values to carry forward")
        if unfilled:
            diagnostics.append(
                audit.Diagnostic(
                    kind=audit.BOUNDARY_UNFILLED,
                    severity=audit.INFO,
                    payload={"column": target_column, "rows": sorted(unfilled)},
                )
            )
        nullable = any(c is None for c in cells)
        new_col = Column(target_column, replace(target.dtype, nullable=nullable), tuple(cells))
    else:  # linear
        def as_x(v) -> float:
            return float(v.toordinal()) if order_col.dtype.kind == DATE else float(v)

        anchors = [i for i in perm if cells[i] is not None]
        if not anchors and t.row_count:
            raise AllNullGroup(f"column {target_column!r} is entirely null")
        pos_of = {i: p for p, i in enumerate(perm)}
        anchor_pos = [pos_of[i] for i in anchors]
        for p, i in enumerate(perm):
            if cells[i] is not None:
                continue
            import bisect

            at = bisect.bisect_left(anchor_pos, p)
            prev_i = anchors[at - 1] if at > 0 else None
            next_i = anchors[at] if at < len(anchors) else None
            if prev_i is None:
                cells[i] = float(cells[next_i])
            elif next_i is None:
                cells[i] = float(cells[prev_i])
            else:
                x0, x1 = as_x(order_col.cells[prev_i]), as_x(order_col.cells[next_i])
                y0, y1 = float(cells[prev_i]), float(cells[next_i])
                x = as_x(order_col.cells[i])
                cells[i] = y0 if x1 == x0 else y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        new_cells = tuple(float(c) if c is not None else None for c in cells)
        new_col = Column(
            target_column, DataType(FLOAT, any(c is None for c in new_cells)), new_cells
        )
    cols = t.columns[:idx] + (new_col,) + t.columns[idx + 1 :]
    return OpResult((("result", Table(cols, t.attribution)),), tuple(diagnostics))

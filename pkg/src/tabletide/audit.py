"""Audit checks and the structured diagnostics they produce.

These operationalize recurring wrangling hazards as explicit, read-only
checks: lossy joins, schema drift across dataset vintages, misleading
whole-column equality tests, and soft keys with no uniqueness guarantee.
Audits never modify tables or bind anything in the environment.

Diagnostics serialize to a line-oriented report (one JSON object per
line with ``kind``, ``severity``, ``payload`` and ``source`` fields);
see :func:`render_report`.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, replace
from typing import Any, List, Mapping, Optional, Sequence

from .errors import NotNumeric, UnknownColumn
from .model import (
    FLOAT,
    INTEGER,
    TEXT,
    Table,
    compare_values,
    format_cell,
)

# Diagnostic kinds.
LOSSY_JOIN = "LossyJoin"
UNMATCHED_LEFT_KEYS = "UnmatchedLeftKeys"
UNUSED_RIGHT_KEYS = "UnusedRightKeys"
SCHEMA_DRIFT = "SchemaDrift"
EQUALITY_MISMATCH = "EqualityMismatch"
KEY_COLLISION = "KeyCollision"
BOUNDARY_UNFILLED = "BoundaryUnfilled"
IRREGULAR_SEPARATION = "IrregularSeparation"
UNMAPPED_LOOKUP_VALUES = "UnmappedLookupValues"

KINDS = (
    LOSSY_JOIN,
    UNMATCHED_LEFT_KEYS,
    UNUSED_RIGHT_KEYS,
    SCHEMA_DRIFT,
    EQUALITY_MISMATCH,
    KEY_COLLISION,
    BOUNDARY_UNFILLED,
    IRREGULAR_SEPARATION,
    UNMAPPED_LOOKUP_VALUES,
)

INFO = "info"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    """A structured, non-blocking audit finding.

    ``source`` is the provenance edge the finding is attached to, when
    the engine raised it during an operation; pull-based audits leave it
    unset. Payload lists are sorted and deduplicated by the producers.
    """

    kind: str
    severity: str
    payload: Mapping[str, Any]
    source: Optional[int] = None
    id: Optional[int] = None

    def attached(self, diagnostic_id: int, edge_id: Optional[int]) -> "Diagnostic":
        return replace(self, id=diagnostic_id, source=edge_id)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "severity": self.severity,
            "payload": _jsonable(self.payload),
            "source": self.source,
        }


def _jsonable(value: Any):
    """Payload values with dates rendered as ISO text for serialization."""
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    import datetime as dt

    if isinstance(value, dt.date):
        return value.isoformat()
    return value


def diagnostic_from_json(doc: Mapping[str, Any]) -> Diagnostic:
    return Diagnostic(
        kind=doc["kind"],
        severity=doc["severity"],
        payload=doc.get("payload", {}),
        source=doc.get("source"),
        id=doc.get("id"),
    )


def render_report(diagnostics: Sequence[Diagnostic]) -> str:
    """One finding per line, as a JSON record."""
    return "".join(json.dumps(d.to_json(), sort_keys=True) + "\n" for d in diagnostics)


def parse_report(text: str) -> List[Diagnostic]:
    return [
        diagnostic_from_json(json.loads(line))
        for line in text.splitlines()
        if line.strip()
    ]


def _sorted_values(values) -> list:
    return sorted(set(values), key=functools.cmp_to_key(compare_values))


def _numeric_column(t: Table, name: str) -> None:
    kind = t.column(name).dtype.kind
    if kind not in (INTEGER, FLOAT):
        raise NotNumeric(f"column {name!r} is {kind}, not numeric")


def _column_sum(t: Table, name: str):
    col = t.column(name)
    values = [c for c in col.cells if c is not None]
    if col.dtype.kind == FLOAT:
        return math.fsum(values)
    return sum(values)


def _default_tol(a: Table, b: Table, column: str, sums=()) -> float:
    """Exact for integer columns; 1e-9 relative for floats."""
    kinds = {a.column(column).dtype.kind, b.column(column).dtype.kind}
    if kinds == {INTEGER}:
        return 0.0
    scale = max([abs(s) for s in sums] + [1.0])
    return 1e-9 * scale


def test_equality_total(
    a: Table, b: Table, column: str, tol: Optional[float] = None
) -> Optional[Diagnostic]:
    """Compare whole-column sums; the weakest equality test.

    Passing says little: opposite per-group errors cancel, which is why
    :func:`test_equality_grouped` exists.
    """
    _numeric_column(a, column)
    _numeric_column(b, column)
    sum_a = _column_sum(a, column)
    sum_b = _column_sum(b, column)
    if tol is None:
        tol = _default_tol(a, b, column, (sum_a, sum_b))
    delta = sum_a - sum_b
    if abs(delta) <= tol:
        return None
    return Diagnostic(
        kind=EQUALITY_MISMATCH,
        severity=WARNING,
        payload={
            "column": column,
            "left_sum": sum_a,
            "right_sum": sum_b,
            "delta": delta,
            "tolerance": tol,
        },
    )


def test_equality_grouped(
    a: Table,
    b: Table,
    group_column: str,
    value_column: str,
    tol: Optional[float] = None,
) -> Optional[Diagnostic]:
    """Compare per-group sums after full outer alignment of group levels.

    Every group whose delta exceeds the tolerance is reported, including
    groups present on only one side (the other side counts as zero and
    the group is flagged missing).
    """
    for t in (a, b):
        t.col_index(group_column)
    _numeric_column(a, value_column)
    _numeric_column(b, value_column)

    def group_sums(t: Table) -> dict:
        sums: dict = {}
        gcol = t.column(group_column)
        vcol = t.column(value_column)
        for g, v in zip(gcol.cells, vcol.cells):
            if v is not None:
                sums[g] = sums.get(g, 0) + v
            else:
                sums.setdefault(g, 0)
        return sums

    sums_a = group_sums(a)
    sums_b = group_sums(b)
    if tol is None:
        tol = _default_tol(a, b, value_column, tuple(sums_a.values()) + tuple(sums_b.values()))
    levels = _sorted_values(list(sums_a) + list(sums_b))
    deltas = {}
    missing_in_left = []
    missing_in_right = []
    for level in levels:
        in_a, in_b = level in sums_a, level in sums_b
        if not in_a:
            missing_in_left.append(level)
        if not in_b:
            missing_in_right.append(level)
        delta = sums_a.get(level, 0) - sums_b.get(level, 0)
        if abs(delta) > tol or not (in_a and in_b):
            deltas[format_cell(level)] = delta
    if not deltas:
        return None
    return Diagnostic(
        kind=EQUALITY_MISMATCH,
        severity=WARNING,
        payload={
            "group_column": group_column,
            "column": value_column,
            "deltas": deltas,
            "missing_in_left": missing_in_left,
            "missing_in_right": missing_in_right,
            "tolerance": tol,
        },
    )


def detect_schema_drift(a: Table, b: Table) -> Optional[Diagnostic]:
    """Differences between two dataset vintages.

    Reports column-name set changes, kind changes on shared names, and
    new or vanished levels per shared text column.
    """
    names_a, names_b = set(a.names), set(b.names)
    added = sorted(names_b - names_a)
    removed = sorted(names_a - names_b)
    dtype_changes = []
    level_changes: dict = {}
    for name in sorted(names_a & names_b):
        kind_a = a.column(name).dtype.kind
        kind_b = b.column(name).dtype.kind
        if kind_a != kind_b:
            dtype_changes.append({"column": name, "from": kind_a, "to": kind_b})
            continue
        if kind_a == TEXT:
            levels_a = {c for c in a.column(name).cells if c is not None}
            levels_b = {c for c in b.column(name).cells if c is not None}
            gained = sorted(levels_b - levels_a)
            lost = sorted(levels_a - levels_b)
            if gained or lost:
                level_changes[name] = {"added": gained, "removed": lost}
    if not (added or removed or dtype_changes or level_changes):
        return None
    return Diagnostic(
        kind=SCHEMA_DRIFT,
        severity=WARNING,
        payload={
            "added_columns": added,
            "removed_columns": removed,
            "dtype_changes": dtype_changes,
            "level_changes": level_changes,
        },
    )


def check_key_uniqueness(t: Table, columns: Sequence[str]) -> Optional[Diagnostic]:
    """Soft keys carry no uniqueness guarantee; this check supplies one.

    Null key parts compare equal to each other, so two (null, "a") tuples
    collide.
    """
    names = list(columns)
    if not names:
        raise UnknownColumn("key check needs at least one column")
    cols = [t.column(name) for name in names]
    counts: dict = {}
    for i in range(t.row_count):
        key = tuple(col.cells[i] for col in cols)
        counts[key] = counts.get(key, 0) + 1
    duplicates = [
        {"key": list(key), "count": count}
        for key, count in counts.items()
        if count > 1
    ]
    if not duplicates:
        return None
    duplicates.sort(key=lambda d: [format_cell(v) for v in d["key"]])
    return Diagnostic(
        kind=KEY_COLLISION,
        severity=WARNING,
        payload={"columns": names, "duplicates": duplicates},
    )


@dataclass(frozen=True)
class ColumnProfile:
    name: str
    dtype: str
    nulls: int
    distinct: int
    minimum: Any = None
    maximum: Any = None


@dataclass(frozen=True)
class ProfileReport:
    """Per-column inspection of a table's state."""

    rows: int
    columns: tuple

    def render(self) -> str:
        lines = [f"rows: {self.rows}", f"columns: {len(self.columns)}"]
        for c in self.columns:
            extent = ""
            if c.minimum is not None or c.maximum is not None:
                extent = f" min={format_cell(c.minimum)} max={format_cell(c.maximum)}"
            lines.append(
                f"  {c.name}: {c.dtype} nulls={c.nulls} distinct={c.distinct}{extent}"
            )
        return "\n".join(lines) + "\n"


def profile_summary(t: Table) -> ProfileReport:
    """Summarize a table: per-column dtype, nulls, distinct, min/max."""
    profiles = []
    for col in t.columns:
        non_null = [c for c in col.cells if c is not None]
        profiles.append(
            ColumnProfile(
                name=col.name,
                dtype=col.dtype.short(),
                nulls=len(col.cells) - len(non_null),
                distinct=len(set(non_null)),
                minimum=min(non_null) if non_null else None,
                maximum=max(non_null) if non_null else None,
            )
        )
    return ProfileReport(rows=t.row_count, columns=tuple(profiles))

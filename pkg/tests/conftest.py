"""Shared fixtures and table-building helpers."""

from __future__ import annotations

import datetime as dt
import random
from typing import Any, Sequence, Tuple

import pytest

from tabletide.model import (
    BOOLEAN,
    DATE,
    FLOAT,
    INTEGER,
    TEXT,
    DataType,
    Table,
)


def T(schema: Sequence[Tuple[str, str]], rows: Sequence[Sequence[Any]] = ()) -> Table:
    """Shorthand table builder: T([("a", "int")], [(1,), (2,)])."""
    return Table.build(
        [(name, DataType.parse(kind)) for name, kind in schema], list(rows)
    )


def ints(name: str, *values) -> Tuple[str, str]:
    return (name, "int")


KIND_POOL = (INTEGER, FLOAT, TEXT, BOOLEAN, DATE)


def random_value(rng: random.Random, kind: str):
    if kind == INTEGER:
        return rng.randint(-50, 50)
    if kind == FLOAT:
        return round(rng.uniform(-100.0, 100.0), 3)
    if kind == TEXT:
        return "s" + str(rng.randint(0, 9))
    if kind == BOOLEAN:
        return rng.random() < 0.5
    return dt.date(2015, 1, 1) + dt.timedelta(days=rng.randint(0, 400))


def random_table(
    rng: random.Random,
    max_cols: int = 8,
    max_rows: int = 64,
    null_rate: float = 0.15,
    kinds: Sequence[str] = KIND_POOL,
    min_cols: int = 1,
    min_rows: int = 0,
) -> Table:
    """Random table with mixed dtypes and nulls (deterministic per rng)."""
    n_cols = rng.randint(min_cols, max_cols)
    n_rows = rng.randint(min_rows, max_rows)
    schema = []
    for i in range(n_cols):
        schema.append((f"c{i}", DataType(rng.choice(list(kinds)), nullable=True)))
    rows = []
    for _ in range(n_rows):
        row = []
        for name, dtype in schema:
            if rng.random() < null_rate:
                row.append(None)
            else:
                row.append(random_value(rng, dtype.kind))
        rows.append(tuple(row))
    return Table.build(schema, rows)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20260810)

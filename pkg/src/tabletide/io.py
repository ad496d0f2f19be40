"""Ingestion and export: CSV per RFC-4180 conventions, a lossless JSON
table format, and HTTP fetch of tabular payloads.

CSV type inference walks the lattice integer < float < text, with date
recognized when every non-null cell is an ISO-8601 calendar date.
Inference is monotone: adding rows can only widen a column's type.
"""

from __future__ import annotations

import csv
import datetime as dt
import io as _stdio
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Union

from .errors import (
    BadQuoting,
    HttpStatusError,
    IoError,
    NetworkError,
    RaggedRow,
)
from .model import (
    DATE,
    FLOAT,
    INTEGER,
    TEXT,
    Column,
    DataType,
    Table,
    format_cell,
)

_INT_RE = re.compile(r"^[+-]?\d+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

TABLE_JSON_FORMAT = "tabletide-table"


@dataclass(frozen=True)
class CsvOptions:
    delimiter: str = ","
    header: bool = True
    quote: str = '"'
    null_literal: str = ""
    infer_types: bool = True

    def __post_init__(self):
        if len(self.delimiter) != 1 or len(self.quote) != 1:
            raise IoError("delimiter and quote must be single characters")
        if self.delimiter == self.quote:
            raise IoError("delimiter and quote must differ")


def _dedupe_names(names: Sequence[str]) -> List[str]:
    seen: dict = {}
    out = []
    for raw in names:
        name = raw if raw else "column"
        if name not in seen:
            seen[name] = 1
            out.append(name)
        else:
            seen[name] += 1
            candidate = f"{name}_{seen[name]}"
            while candidate in seen:
                seen[name] += 1
                candidate = f"{name}_{seen[name]}"
            seen[candidate] = 1
            out.append(candidate)
    return out


def _infer_column(name: str, raw: Sequence[Optional[str]], infer: bool) -> Column:
    if not infer:
        return Column(name, DataType(TEXT, nullable=True), tuple(raw))
    values = [v for v in raw if v is not None]
    if values and all(_INT_RE.match(v) for v in values):
        parsed = [int(v) for v in values]
        if all(-(2**63) <= p <= 2**63 - 1 for p in parsed):
            cells = tuple(int(v) if v is not None else None for v in raw)
            return Column(name, DataType(INTEGER, nullable=True), cells)
    if values and all(_INT_RE.match(v) or _FLOAT_RE.match(v) for v in values):
        cells = tuple(float(v) if v is not None else None for v in raw)
        return Column(name, DataType(FLOAT, nullable=True), cells)
    if values and all(_DATE_RE.match(v) for v in values):
        try:
            cells = tuple(
                dt.date.fromisoformat(v) if v is not None else None for v in raw
            )
            return Column(name, DataType(DATE, nullable=True), cells)
        except ValueError:
            pass
    return Column(name, DataType(TEXT, nullable=True), tuple(raw))


def parse_csv_text(text: str, opts: CsvOptions = CsvOptions()) -> Table:
    """Parse CSV text into a table (see :func:`load_csv`)."""
    reader = csv.reader(
        _stdio.StringIO(text),
        delimiter=opts.delimiter,
        quotechar=opts.quote,
        doublequote=True,
        strict=True,
    )
    records: List[List[str]] = []
    try:
        for record in reader:
            # A blank line is a record with one empty field per RFC-4180;
            # the reader hands it back as [].
            records.append(record if record else [""])
    except csv.Error as exc:
        raise BadQuoting(reader.line_num, str(exc)) from None
    if not records:
        return Table(())
    if opts.header:
        names = _dedupe_names(records[0])
        body = records[1:]
        first_body_line = 2
    else:
        names = [f"c{i + 1}" for i in range(len(records[0]))]
        body = records
        first_body_line = 1
    width = len(names)
    for offset, record in enumerate(body):
        if len(record) != width:
            raise RaggedRow(first_body_line + offset, width, len(record))
    raw_columns: List[List[Optional[str]]] = [[] for _ in range(width)]
    for record in body:
        for i, cell in enumerate(record):
            raw_columns[i].append(None if cell == opts.null_literal else cell)
    columns = tuple(
        _infer_column(name, raw, opts.infer_types)
        for name, raw in zip(names, raw_columns)
    )
    return Table(columns)


def load_csv(path: Union[str, Path], opts: CsvOptions = CsvOptions()) -> Table:
    """Load a CSV file; header row becomes column names, types inferred."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    table = parse_csv_text(text, opts)
    return table.with_attribution(str(path))


def save_csv(t: Table, path: Union[str, Path], opts: CsvOptions = CsvOptions()) -> None:
    """Write RFC-4180 CSV: minimal quoting, nulls as empty fields, LF ends."""
    buffer = _stdio.StringIO()
    writer = csv.writer(
        buffer,
        delimiter=opts.delimiter,
        quotechar=opts.quote,
        doublequote=True,
        quoting=csv.QUOTE_MINIMAL,
        lineterminator="\n",
    )
    if opts.header:
        writer.writerow(t.names)
    for row in t.rows():
        writer.writerow(
            [opts.null_literal if cell is None else _csv_cell(cell) for cell in row]
        )
    try:
        Path(path).write_text(buffer.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def _csv_cell(cell: Any) -> str:
    if isinstance(cell, str):
        return cell
    return format_cell(cell)


# ---------------------------------------------------------------------------
# JSON table format (lossless interchange, keeps the int/float distinction)


def table_to_doc(t: Table) -> dict:
    return {
        "format": TABLE_JSON_FORMAT,
        "version": 1,
        "attribution": t.attribution,
        "schema": [
            {"name": c.name, "dtype": c.dtype.kind, "nullable": c.dtype.nullable}
            for c in t.columns
        ],
        "rows": [
            [cell.isoformat() if isinstance(cell, dt.date) else cell for cell in row]
            for row in t.rows()
        ],
    }


def table_from_doc(doc: dict) -> Table:
    if doc.get("format") != TABLE_JSON_FORMAT:
        raise IoError("not a tabletide table document")
    schema = []
    for entry in doc["schema"]:
        schema.append((entry["name"], DataType(entry["dtype"], entry.get("nullable", True))))
    rows = []
    for raw in doc["rows"]:
        row = []
        for (name, dtype), cell in zip(schema, raw):
            if cell is None:
                row.append(None)
            elif dtype.kind == DATE:
                row.append(dt.date.fromisoformat(cell))
            elif dtype.kind == FLOAT:
                row.append(float(cell))
            else:
                row.append(cell)
        rows.append(tuple(row))
    table = Table.build(schema, rows)
    return table.with_attribution(doc.get("attribution"))


def save_table_json(t: Table, path: Union[str, Path]) -> None:
    try:
        Path(path).write_text(
            json.dumps(table_to_doc(t), indent=2, sort_keys=True, allow_nan=False) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def load_table_json(path: Union[str, Path]) -> Table:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    try:
        return table_from_doc(json.loads(text))
    except (ValueError, KeyError, TypeError) as exc:
        raise IoError(f"bad table document {path}: {exc}") from None


# ---------------------------------------------------------------------------
# HTTP fetch


def fetch(url: str, opts: CsvOptions = CsvOptions(), timeout: float = 30.0) -> Table:
    """Fetch a CSV or table-JSON payload over http(s)."""
    import requests

    if not re.match(r"^https?://", url):
        raise NetworkError(f"only http(s) URLs are supported, got {url!r}")
    try:
        response = requests.get(url, timeout=timeout)
    except requests.RequestException as exc:
        raise NetworkError(f"fetch of {url} failed: {exc}") from None
    if response.status_code != 200:
        raise HttpStatusError(response.status_code, url)
    body = response.text
    content_type = response.headers.get("content-type", "")
    if "json" in content_type or body.lstrip().startswith("{"):
        try:
            table = table_from_doc(json.loads(body))
        except (ValueError, KeyError, TypeError) as exc:
            raise IoError(f"bad table document from {url}: {exc}") from None
    else:
        table = parse_csv_text(body, opts)
    return table.with_attribution(url)


# ---------------------------------------------------------------------------
# Dispatch used by the pipeline language


def load_table(path_or_url: str) -> Tuple[Table, str]:
    """Load by scheme/extension; returns (table, provenance op name)."""
    if re.match(r"^https?://", path_or_url):
        return fetch(path_or_url), "fetch"
    if path_or_url.lower().endswith(".json"):
        return load_table_json(path_or_url), "load_json"
    return load_csv(path_or_url), "load_csv"


def save_table(t: Table, path: str) -> None:
    if path.lower().endswith(".json"):
        save_table_json(t, path)
    else:
        save_csv(t, path)

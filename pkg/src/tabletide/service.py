"""Session-oriented HTTP API for the preview-then-commit wrangling loop.

Each session is an isolated in-memory environment plus provenance graph.
``/preview`` runs an operation against copies and never mutates session
state; ``/op`` commits. Sessions expire after an idle timeout; the
durable record of a wrangling run is the pipeline script, not the
session.

Requests within one session are serialized (single-writer environment);
different sessions proceed concurrently.
"""

from __future__ import annotations

import re
import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException, Request, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import dsl, io as tio, registry
from .algebra import Aggregator, BinSpec
from .engine import ApplyOutcome, Session
from .errors import (
    ParseError,
    TableTideError,
    TypeMismatch,
    UnknownHandle,
    UnknownOperation,
)
from .expr import Expr
from .model import DataType, Table

DEFAULT_UPLOAD_LIMIT = 64 * 1024 * 1024
DEFAULT_TABLE_CAP = 256
DEFAULT_IDLE_TIMEOUT = 3600.0


class OpRequest(BaseModel):
    op: str
    params: Dict[str, Any] = {}
    outputs: List[str] = []


class PreviewRequest(BaseModel):
    op: str
    params: Dict[str, Any] = {}
    outputs: List[str] = []
    limit: int = 10


class PipelineRequest(BaseModel):
    source: str


@dataclass
class _Entry:
    session: Session
    lock: threading.RLock = field(default_factory=threading.RLock)
    last_access: float = field(default_factory=time.monotonic)


class SessionStore:
    def __init__(self, idle_timeout: float = DEFAULT_IDLE_TIMEOUT):
        self._entries: Dict[str, _Entry] = {}
        self._lock = threading.Lock()
        self.idle_timeout = idle_timeout

    def create(self) -> str:
        session_id = secrets.token_urlsafe(16)
        with self._lock:
            self._entries[session_id] = _Entry(Session())
        return session_id

    def get(self, session_id: str) -> _Entry:
        now = time.monotonic()
        with self._lock:
            expired = [
                sid
                for sid, entry in self._entries.items()
                if now - entry.last_access > self.idle_timeout
            ]
            for sid in expired:
                del self._entries[sid]
            entry = self._entries.get(session_id)
            if entry is None:
                raise HTTPException(404, f"unknown session {session_id!r}")
            entry.last_access = now
            return entry


# ---------------------------------------------------------------------------
# Wire-format coercion into engine parameter objects


def _parse_expr_str(value: Any, what: str) -> Expr:
    if isinstance(value, Expr):
        return value
    if not isinstance(value, str):
        raise TypeMismatch(f"{what} must be an expression string")
    return dsl.parse_expression(value)


def _coerce_param(param: registry.Param, value: Any) -> Any:
    kind = param.kind
    if kind in ("handle", "column", "name", "string"):
        if not isinstance(value, str):
            raise TypeMismatch(f"{param.name} must be a string")
        return value
    if kind in ("handles", "columns", "names"):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise TypeMismatch(f"{param.name} must be a list of names")
        return value
    if kind in ("expr", "pred"):
        return _parse_expr_str(value, param.name)
    if kind == "expr_or_lookup":
        if isinstance(value, dict):
            return dict(value)
        if isinstance(value, list):
            return {old: new for old, new in value}
        return _parse_expr_str(value, param.name)
    if kind == "selector":
        if isinstance(value, list):
            return [int(i) for i in value]
        return _parse_expr_str(value, param.name)
    if kind == "values":
        if not isinstance(value, list):
            raise TypeMismatch(f"{param.name} must be a list of cell values")
        return tuple(value)
    if kind == "values_rows":
        if not isinstance(value, list):
            raise TypeMismatch(f"{param.name} must be a list of rows")
        return [tuple(row) for row in value]
    if kind == "edits":
        if not isinstance(value, dict):
            raise TypeMismatch(f"{param.name} must map columns to values")
        return dict(value)
    if kind == "gen_map":
        if not isinstance(value, dict):
            raise TypeMismatch(f"{param.name} must map columns to expressions")
        return {name: _parse_expr_str(gen, name) for name, gen in value.items()}
    if kind == "schema":
        schema = []
        for entry in value:
            if isinstance(entry, dict):
                schema.append((entry["name"], DataType.parse(entry["dtype"])))
            else:
                schema.append((entry[0], DataType.parse(entry[1])))
        return schema
    if kind == "sort_keys":
        keys = []
        for entry in value:
            if isinstance(entry, dict):
                keys.append((entry["column"], entry.get("direction", "asc")))
            else:
                keys.append((entry[0], entry[1]))
        return keys
    if kind == "aggs":
        aggs = []
        for entry in value:
            if isinstance(entry, dict):
                fn = entry["fn"]
                target = entry.get("target")
                out = entry["as"]
            else:
                fn, target, out = entry
            aggs.append((Aggregator(fn, target), out))
        return aggs
    if kind == "splitter":
        if isinstance(value, str):
            return value
        return [int(v) for v in value]
    if kind == "combiner":
        if isinstance(value, dict) and "expr" in value:
            return _parse_expr_str(value["expr"], param.name)
        if not isinstance(value, str):
            raise TypeMismatch(f"{param.name} must be a separator or {{'expr': ...}}")
        return value
    if kind == "binspec":
        if isinstance(value, dict):
            return BinSpec(int(value["k"]), value.get("low"), value.get("high"))
        return BinSpec(int(value))
    if kind == "dtype":
        return DataType.parse(value) if isinstance(value, str) else value
    if kind == "choice":
        return value
    return value


def coerce_params(spec: registry.OpSpec, raw: Dict[str, Any]) -> Dict[str, Any]:
    params = {}
    known = {p.name: p for p in spec.params}
    for name, value in raw.items():
        if name not in known:
            raise UnknownOperation(f"{spec.name} has no parameter {name!r}")
        if value is None:
            continue
        params[name] = _coerce_param(known[name], value)
    return params


# ---------------------------------------------------------------------------
# Serialization helpers


def _schema_json(table: Table) -> list:
    return [
        {"name": c.name, "dtype": c.dtype.kind, "nullable": c.dtype.nullable}
        for c in table.columns
    ]


def _rows_json(table: Table, offset: int, limit: Optional[int]) -> list:
    import datetime as dt

    end = table.row_count if limit is None else min(table.row_count, offset + limit)
    out = []
    for i in range(max(offset, 0), end):
        out.append(
            [
                cell.isoformat() if isinstance(cell, dt.date) else cell
                for cell in table.row(i)
            ]
        )
    return out


def _table_summary(handle: str, table: Table) -> dict:
    return {
        "handle": handle,
        "rows": table.row_count,
        "schema": _schema_json(table),
    }


def _diagnostics_json(diagnostics) -> list:
    return [d.to_json() for d in diagnostics]


def _outcome_json(outcome: ApplyOutcome) -> dict:
    return {
        "op": outcome.op,
        "outputs": [_table_summary(h, t) for h, t in outcome.outputs],
        "diagnostics": _diagnostics_json(outcome.diagnostics),
        "edges": outcome.edge_ids,
    }


_SAFE_HANDLE = re.compile(r"^[A-Za-z_]\w*$")


def create_app(
    static_dir: Optional[str] = None,
    upload_limit: int = DEFAULT_UPLOAD_LIMIT,
    table_cap: int = DEFAULT_TABLE_CAP,
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT,
) -> FastAPI:
    app = FastAPI(title="tabletide", version="0.1.0")
    store = SessionStore(idle_timeout)
    app.state.store = store

    @app.exception_handler(TableTideError)
    async def _engine_error(request: Request, exc: TableTideError):
        status = 404 if isinstance(exc, UnknownHandle) else 422
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "service": "tabletide"}

    @app.post("/session")
    def create_session():
        return {"session": store.create()}

    @app.get("/session/{sid}/tables")
    def list_tables(sid: str):
        entry = store.get(sid)
        with entry.lock:
            session = entry.session
            return {
                "tables": [
                    _table_summary(handle, table)
                    for handle, table in session.env.items()
                ]
            }

    @app.get("/session/{sid}/table/{handle}")
    def get_table(sid: str, handle: str, offset: int = 0, limit: int = 100):
        entry = store.get(sid)
        with entry.lock:
            table = entry.session.table(handle)
            return {
                "handle": handle,
                "schema": _schema_json(table),
                "rows": _rows_json(table, offset, limit),
                "offset": offset,
                "total": table.row_count,
            }

    def _validated(session: Session, req: OpRequest) -> tuple:
        spec = registry.get(req.op)
        params = coerce_params(spec, req.params)
        for handle in req.outputs:
            if not _SAFE_HANDLE.match(handle or ""):
                raise TypeMismatch(f"invalid output handle {handle!r}")
        return spec, params

    @app.post("/session/{sid}/op")
    def apply_op(sid: str, req: OpRequest):
        entry = store.get(sid)
        with entry.lock:
            session = entry.session
            spec, params = _validated(session, req)
            for handle in req.outputs:
                if session.env.is_bound(handle):
                    raise HTTPException(
                        409, f"handle {handle!r} is already bound; pick a new name"
                    )
            if len(session.env) >= table_cap:
                raise HTTPException(422, f"session exceeds the {table_cap}-table cap")
            outcome = session.apply(req.op, params, req.outputs)
            return _outcome_json(outcome)

    @app.post("/session/{sid}/preview")
    def preview_op(sid: str, req: PreviewRequest):
        entry = store.get(sid)
        with entry.lock:
            session = entry.session
            spec, params = _validated(
                session, OpRequest(op=req.op, params=req.params, outputs=req.outputs)
            )
            outcome = session.preview(req.op, params, req.outputs)
            outputs = []
            for handle, table in outcome.outputs:
                summary = _table_summary(handle, table)
                summary["preview_rows"] = _rows_json(table, 0, max(req.limit, 0))
                outputs.append(summary)
            return {
                "op": outcome.op,
                "outputs": outputs,
                "diagnostics": _diagnostics_json(outcome.diagnostics),
            }

    @app.get("/session/{sid}/provenance")
    def provenance(sid: str):
        entry = store.get(sid)
        with entry.lock:
            import json

            return json.loads(entry.session.graph.export_json())

    @app.post("/session/{sid}/pipeline")
    def run_pipeline(sid: str, req: PipelineRequest):
        entry = store.get(sid)
        with entry.lock:
            session = entry.session
            try:
                pipeline = dsl.parse(req.source)
            except ParseError as exc:
                raise HTTPException(
                    422,
                    {"error": "ParseError", "line": exc.line, "column": exc.column,
                     "detail": exc.message},
                ) from None
            issues = dsl.check(pipeline, prebound=session.env.handles())
            if dsl.has_errors(issues):
                raise HTTPException(
                    422,
                    {
                        "error": "CheckError",
                        "issues": [
                            {"severity": i.severity, "line": i.line, "message": i.message}
                            for i in issues
                        ],
                    },
                )
            report = dsl.execute(pipeline, session)
            return {
                "ok": report.ok,
                "failed_statement": (
                    None if report.ok else report.error.statement_index
                ),
                "statements": [
                    {
                        "index": o.index,
                        "line": o.line,
                        "text": o.text,
                        "status": o.status,
                        "detail": o.detail,
                        "diagnostics": o.diagnostics,
                    }
                    for o in report.outcomes
                ],
            }

    @app.post("/session/{sid}/upload")
    async def upload(sid: str, file: UploadFile, handle: Optional[str] = None):
        entry = store.get(sid)
        content = await file.read()
        if len(content) > upload_limit:
            raise HTTPException(422, f"upload exceeds {upload_limit} bytes")
        with entry.lock:
            session = entry.session
            if len(session.env) >= table_cap:
                raise HTTPException(422, f"session exceeds the {table_cap}-table cap")
            name = handle or re.sub(r"\W+", "_", (file.filename or "table").rsplit(".", 1)[0])
            if not _SAFE_HANDLE.match(name):
                name = f"t_{name}" if name else "table"
            if session.env.is_bound(name):
                raise HTTPException(409, f"handle {name!r} is already bound")
            try:
                table = tio.parse_csv_text(content.decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise HTTPException(422, f"upload is not UTF-8: {exc}") from None
            table = table.with_attribution(f"upload:{file.filename}")
            session.add_table(
                table, name, op="upload_csv", params={"filename": file.filename}
            )
            return _table_summary(name, table)

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app

"""Batch command line: run pipelines, profile tables, check scripts, serve.

Exit codes: 0 success, 1 pipeline/audit error, 2 usage error (including
pipeline parse errors), 3 I/O error. Data and reports go to stdout,
errors to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import audit, dsl
from .engine import Session
from .errors import IoError, ParseError, RaggedRow, TableTideError

OK = 0
PIPELINE_ERROR = 1
USAGE_ERROR = 2
IO_ERROR = 3

DEFAULT_PORT = 7341


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabletide",
        description="Multi-table wrangling: pipelines, audits, provenance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a .wr pipeline")
    run.add_argument("pipeline", help="pipeline file path")
    run.add_argument(
        "--provenance",
        nargs=2,
        metavar=("FORMAT", "PATH"),
        help="write the provenance graph (FORMAT: dot or json)",
    )
    run.add_argument(
        "--diagnostics", metavar="PATH", help="write the audit report (JSON lines)"
    )
    run.add_argument(
        "--fail-on",
        choices=["warning", "never"],
        default="never",
        help="whether warning diagnostics fail the run (default: never)",
    )

    profile = sub.add_parser("profile", help="print a CSV profile report")
    profile.add_argument("csv", help="CSV file path")

    checkcmd = sub.add_parser("check", help="parse and statically check a pipeline")
    checkcmd.add_argument("pipeline", help="pipeline file path")

    serve = sub.add_parser("serve", help="start the HTTP wrangling service")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--static", metavar="DIR", help="serve UI assets from DIR")
    return parser


def _read_pipeline(path: str) -> str:
    p = Path(path)
    try:
        return p.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None


def cmd_run(args) -> int:
    try:
        source = _read_pipeline(args.pipeline)
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR
    try:
        pipeline = dsl.parse(source)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    issues = dsl.check(pipeline)
    for issue in issues:
        stream = sys.stderr if issue.severity == dsl.ERROR else sys.stdout
        print(f"{issue.severity}: line {issue.line}: {issue.message}", file=stream)
    if dsl.has_errors(issues):
        return PIPELINE_ERROR

    session = Session()
    report = dsl.execute(pipeline, session, base_dir=str(Path(args.pipeline).parent))
    for outcome in report.outcomes:
        print(f"[{outcome.status}] {outcome.text}" + (f"  # {outcome.detail}" if outcome.detail else ""))
    if args.provenance:
        fmt, path = args.provenance
        if fmt not in ("dot", "json"):
            print(f"error: unknown provenance format {fmt!r}", file=sys.stderr)
            return USAGE_ERROR
        text = session.graph.export_dot() if fmt == "dot" else session.graph.export_json()
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot write {path}: {exc}", file=sys.stderr)
            return IO_ERROR
    if args.diagnostics:
        try:
            Path(args.diagnostics).write_text(
                audit.render_report(session.diagnostics), encoding="utf-8"
            )
        except OSError as exc:
            print(f"error: cannot write {args.diagnostics}: {exc}", file=sys.stderr)
            return IO_ERROR
    if report.error is not None:
        print(f"error: {report.error}", file=sys.stderr)
        cause = report.error.cause
        return IO_ERROR if isinstance(cause, IoError) else PIPELINE_ERROR
    if args.fail_on == "warning" and any(
        d.severity == audit.WARNING for d in session.diagnostics
    ):
        print("failing on warning diagnostics (--fail-on warning)", file=sys.stderr)
        return PIPELINE_ERROR
    return OK


def cmd_profile(args) -> int:
    from . import io as tio

    try:
        table = tio.load_csv(args.csv)
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR
    except (RaggedRow, TableTideError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PIPELINE_ERROR
    sys.stdout.write(audit.profile_summary(table).render())
    return OK


def cmd_check(args) -> int:
    try:
        source = _read_pipeline(args.pipeline)
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR
    try:
        pipeline = dsl.parse(source)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    issues = dsl.check(pipeline)
    for issue in issues:
        print(f"{issue.severity}: line {issue.line}: {issue.message}")
    return PIPELINE_ERROR if dsl.has_errors(issues) else OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    port = args.port
    if port is None:
        port = int(os.environ.get("TABLETIDE_PORT", DEFAULT_PORT))
    app = create_app(static_dir=args.static)
    try:
        uvicorn.run(app, host=args.host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"error: cannot serve on port {port}: {exc}", file=sys.stderr)
        return IO_ERROR
    return OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "run": cmd_run,
        "profile": cmd_profile,
        "check": cmd_check,
        "serve": cmd_serve,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())

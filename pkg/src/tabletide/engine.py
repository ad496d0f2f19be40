"""Session engine: applies operations, binding outputs and recording provenance.

A :class:`Session` couples an :class:`~tabletide.model.Environment` with a
:class:`~tabletide.provenance.ProvenanceGraph` and a diagnostics log. Every
applied operation becomes one provenance edge; composites are macro-expanded
so the graph shows the true multi-table flow, with a group tag linking the
expanded steps. Discarded siblings (a filter's rest, a composite's
intermediates) stay in the graph as tombstoned nodes, so no data flow is
hidden and, at any time, live (non-tombstoned) nodes correspond one to one
with the environment's bindings.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from . import algebra, registry
from .audit import Diagnostic
from .errors import NameCollision, TypeMismatch, UnknownOperation
from .expr import Expr, Lit, referenced_columns
from .model import DataType, Environment, Table
from .provenance import ProvenanceGraph


@dataclass
class ApplyOutcome:
    """What an operation did: bound handles, their tables, findings."""

    op: str
    outputs: List[Tuple[str, Table]]
    diagnostics: List[Diagnostic]
    edge_ids: List[int]

    @property
    def handles(self) -> List[str]:
        return [h for h, _ in self.outputs]


def _slug(label: str) -> str:
    if label == "∅":
        return "null"
    text = re.sub(r"[^0-9A-Za-z]+", "_", label).strip("_")
    if not text:
        return "part"
    if text[0].isdigit():
        text = "v" + text
    return text


class Session:
    """A wrangling session: environment + provenance + diagnostics log."""

    def __init__(self) -> None:
        self.env = Environment()
        self.graph = ProvenanceGraph()
        self.diagnostics: List[Diagnostic] = []
        self._node_of: Dict[str, int] = {}
        self._group_counter = 0
        self._temp_counter = 0

    # ------------------------------------------------------------------
    # bookkeeping

    def node_id(self, handle: str) -> int:
        self.env.lookup(handle)
        return self._node_of[handle]

    def table(self, handle: str) -> Table:
        return self.env.lookup(handle)

    def _bind(self, handle: str, table: Table, node_id: int) -> None:
        if self.env.is_bound(handle):
            # Rebinding supersedes the old version: tombstone it.
            self.graph.tombstone(self._node_of[handle])
        self.env.bind(handle, table)
        self._node_of[handle] = node_id

    def _temp_name(self, stem: str) -> str:
        while True:
            self._temp_counter += 1
            name = f"_{stem}_{self._temp_counter}"
            if not self.env.is_bound(name):
                return name

    def add_table(
        self,
        table: Table,
        handle: str,
        op: str = "create_table",
        params: Optional[Dict[str, Any]] = None,
    ) -> ApplyOutcome:
        """Introduce an externally produced table (load, fetch, upload)."""
        edge, node_ids = self.graph.record(op, params or {}, [], [(handle, table)])
        self._bind(handle, table, node_ids[0])
        return ApplyOutcome(op, [(handle, table)], [], [edge.id])

    def delete(self, handle: str) -> ApplyOutcome:
        """Delete a table: unbind it and tombstone its provenance node."""
        node_id = self.node_id(handle)
        self.env.unbind(handle)
        edge, _ = self.graph.record("delete_table", {"table": handle}, [node_id], [])
        self.graph.tombstone(node_id)
        del self._node_of[handle]
        return ApplyOutcome("delete_table", [], [], [edge.id])

    def mark_sink(self, handle: str) -> None:
        self.graph.mark_sink(self.node_id(handle))

    def record_audit(self, diagnostic: Optional[Diagnostic]) -> Optional[Diagnostic]:
        """Log a pull-based audit finding (no provenance edge)."""
        if diagnostic is None:
            return None
        stamped = self.graph.add_diagnostic(diagnostic)
        self.diagnostics.append(stamped)
        return stamped

    # ------------------------------------------------------------------
    # applying operations

    def apply(
        self,
        op: str,
        params: Dict[str, Any],
        outputs: Sequence[str],
        group: Optional[str] = None,
    ) -> ApplyOutcome:
        """Run one operation, bind its outputs and record provenance."""
        spec = registry.get(op)
        _validate_params(spec, params)
        for handle in outputs:
            if not handle or not re.match(r"^[A-Za-z_]\w*$", handle):
                raise NameCollision(f"invalid output handle {handle!r}")
        if spec.composite:
            return self._apply_composite(spec, params, list(outputs), group)
        return self._apply_algebra(spec, params, [(h, "bind") for h in outputs], group)

    def preview(
        self, op: str, params: Dict[str, Any], outputs: Sequence[str]
    ) -> ApplyOutcome:
        """Run an operation against copies; this session stays untouched."""
        scratch = Session()
        scratch.env = copy.copy(self.env)
        scratch.env._bindings = dict(self.env._bindings)
        scratch.env._versions = dict(self.env._versions)
        scratch.graph = copy.deepcopy(self.graph)
        scratch._node_of = dict(self._node_of)
        scratch._group_counter = self._group_counter
        scratch._temp_counter = self._temp_counter
        return scratch.apply(op, params, outputs)

    # ------------------------------------------------------------------
    # internals

    def _apply_algebra(
        self,
        spec: registry.OpSpec,
        params: Dict[str, Any],
        bindings: Sequence[Tuple[str, str]],
        group: Optional[str],
    ) -> ApplyOutcome:
        if spec.name == "delete_table":
            return self.delete(params["table"])
        input_handles = _input_handles(spec, params)
        input_ids = [self.node_id(h) for h in input_handles]
        labeled, diagnostics = _run_algebra(self, spec.name, params)
        bindings = list(bindings)
        if spec.outputs == -1:
            if len(bindings) != 1:
                raise NameCollision(
                    f"{spec.name} takes one output name used as a prefix"
                )
            prefix, mode = bindings[0]
            bindings = []
            used = set()
            for label, _ in labeled:
                slug = _slug(label)
                name = f"{prefix}_{slug}"
                n = 2
                while name in used:
                    name = f"{prefix}_{slug}{n}"
                    n += 1
                used.add(name)
                bindings.append((name, mode))
        elif len(bindings) != len(labeled):
            raise NameCollision(
                f"{spec.name} produces {len(labeled)} tables, got "
                f"{len(bindings)} output names"
            )
        named = [(handle, table) for (handle, _), (_, table) in zip(bindings, labeled)]
        tombstoned = {handle for handle, mode in bindings if mode == "discard"}
        edge, node_ids = self.graph.record(
            spec.name, _provenance_params(params), input_ids, named,
            group=group, tombstoned_outputs=tombstoned,
        )
        bound = []
        for (handle, mode), node_id, (_, table) in zip(bindings, node_ids, labeled):
            if mode == "bind":
                self._bind(handle, table, node_id)
                bound.append((handle, table))
        stamped = self.graph.attach_diagnostics(edge, diagnostics)
        self.diagnostics.extend(stamped)
        return ApplyOutcome(spec.name, bound, stamped, [edge.id])

    def _apply_composite(
        self,
        spec: registry.OpSpec,
        params: Dict[str, Any],
        outputs: List[str],
        group: Optional[str],
    ) -> ApplyOutcome:
        self._group_counter += 1
        tag = group or f"{spec.name}#{self._group_counter}"
        expander = _COMPOSITES[spec.name]
        if len(outputs) != 1:
            raise NameCollision(f"{spec.name} binds exactly one output table")
        before = len(self.diagnostics)
        edges_before = len(self.graph.edges)
        result = expander(self, params, outputs[0], tag)
        edge_ids = [e.id for e in self.graph.edges[edges_before:]]
        return ApplyOutcome(
            spec.name,
            [(outputs[0], self.env.lookup(outputs[0]))],
            self.diagnostics[before:],
            edge_ids,
        )

    def _step(
        self,
        op: str,
        params: Dict[str, Any],
        bindings: Sequence[Tuple[str, str]],
        tag: str,
    ) -> List[str]:
        """One expanded composite step; returns the bound handle names."""
        spec = registry.get(op)
        outcome = self._apply_algebra(spec, params, bindings, tag)
        return outcome.handles

    def _discard_temp(self, handle: str) -> None:
        """Drop a consumed composite intermediate from the environment."""
        node_id = self._node_of.pop(handle)
        self.env.unbind(handle)
        self.graph.tombstone(node_id)


def _input_handles(spec: registry.OpSpec, params: Dict[str, Any]) -> List[str]:
    handles: List[str] = []
    for p in spec.params:
        if p.kind == "handle" and p.name in params:
            handles.append(params[p.name])
        elif p.kind == "handles" and p.name in params:
            handles.extend(params[p.name])
    return handles


def _validate_params(spec: registry.OpSpec, params: Dict[str, Any]) -> None:
    known = {p.name for p in spec.params}
    for name in params:
        if name not in known:
            raise UnknownOperation(f"{spec.name} has no parameter {name!r}")
    for p in spec.params:
        if p.required and p.name not in params:
            raise TypeMismatch(f"{spec.name} requires parameter {p.name!r}")
        if p.kind in ("handle",) and p.name in params and not isinstance(params[p.name], str):
            raise TypeMismatch(f"{spec.name}.{p.name} must be a handle name")
        if p.kind == "choice" and p.name in params and params[p.name] not in p.choices:
            raise TypeMismatch(
                f"{spec.name}.{p.name} must be one of {list(p.choices)}"
            )


def _provenance_params(params: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in params.items() if v is not None}


def _run_algebra(
    session: Session, op: str, params: Dict[str, Any]
) -> Tuple[List[Tuple[str, Table]], List[Diagnostic]]:
    """Execute one algebra operation against the session's environment."""
    p = dict(params)
    t = session.table(p["table"]) if "table" in p else None
    if op == "create":
        return [("result", algebra.create_table(p["schema"], p.get("rows", ())))], []
    if op == "create_column":
        return [
            ("result", algebra.create_column(t, p["name"], p["dtype"], p["generator"]))
        ], []
    if op == "create_row":
        return [("result", algebra.create_row(t, p["values"]))], []
    if op == "delete_column":
        return [("result", algebra.delete_column(t, p["column"]))], []
    if op == "delete_row":
        return [("result", algebra.delete_row(t, p["selector"]))], []
    if op == "rearrange":
        return [
            ("result", algebra.rearrange(t, p.get("sort_keys", ()), p.get("column_order")))
        ], []
    if op == "fold":
        return [
            ("result", algebra.reshape_fold(t, p["value_columns"], p["key_name"], p["value_name"]))
        ], []
    if op == "unfold":
        return [
            ("result", algebra.reshape_unfold(t, p["key_column"], p["value_column"]))
        ], []
    if op == "transform_column":
        result = algebra.transform_column(t, p["column"], p["mapping"])
        return list(result.tables), list(result.diagnostics)
    if op == "transform_row":
        return [("result", algebra.transform_row(t, p["selector"], p["edits"]))], []
    if op == "subset":
        matching, rest = algebra.subset(t, p["predicate"])
        return [("matching", matching), ("rest", rest)], []
    if op == "decompose":
        return list(algebra.decompose(t, p["column"], p.get("bins"))), []
    if op == "split":
        left, right = algebra.split(t, p["key"], p["right_columns"])
        return [("left", left), ("right", right)], []
    if op == "separate_column":
        result = algebra.separate_column(t, p["column"], p["splitter"], p["new_names"])
        return list(result.tables), list(result.diagnostics)
    if op == "separate_row":
        return [("result", algebra.separate_row(t, p["column"], p["delimiter"]))], []
    if op == "extend":
        tables = [session.table(h) for h in p["tables"]]
        result = algebra.extend(tables, algebra.SchemaPolicy(p.get("policy", "strict")))
        return list(result.tables), list(result.diagnostics)
    if op == "supplement":
        result = algebra.supplement(
            session.table(p["left"]), session.table(p["right"]), p["key"]
        )
        return list(result.tables), list(result.diagnostics)
    if op == "match":
        result = algebra.match_join(
            session.table(p["left"]), session.table(p["right"]), p["key"],
            p.get("mode", "inner"),
        )
        return list(result.tables), list(result.diagnostics)
    if op == "combine_columns":
        return [
            ("result", algebra.combine_columns(t, p["columns"], p["combiner"], p["new_name"]))
        ], []
    if op == "summarize":
        return [
            ("result", algebra.summarize(t, p.get("group_columns", ()), p["aggs"]))
        ], []
    if op == "interpolate":
        result = algebra.interpolate(
            t, p.get("order"), p["target"], p["method"], p.get("group_columns", ())
        )
        return list(result.tables), list(result.diagnostics)
    raise UnknownOperation(f"no executor for {op!r}")


# ---------------------------------------------------------------------------
# Composite expansions


def _filter(session: Session, p: Dict[str, Any], target: str, tag: str) -> None:
    session._step(
        "subset",
        {"table": p["table"], "predicate": p["predicate"]},
        [(target, "bind"), (f"{target}__rest", "discard")],
        tag,
    )


def _group_aggregate(session: Session, p: Dict[str, Any], target: str, tag: str) -> None:
    group_col = p["group"]
    aggs = p["aggs"]
    source = session.table(p["table"])
    dtype = source.column(group_col).dtype
    prefix = session._temp_name("part")
    parts = session._step(
        "decompose", {"table": p["table"], "column": group_col}, [(prefix, "bind")], tag
    )
    # Empty parts (a boolean level with no rows) contribute no groups.
    nonempty = [h for h in parts if session.table(h).row_count]
    reattached = []
    for handle in nonempty:
        level = session.table(handle).column(group_col).cells[0]
        summary = session._temp_name("summary")
        session._step(
            "summarize",
            {"table": handle, "group_columns": [], "aggs": aggs},
            [(summary, "bind")],
            tag,
        )
        labeled = session._temp_name("labeled")
        session._step(
            "create_column",
            {
                "table": summary,
                "name": group_col,
                "dtype": DataType(dtype.kind, nullable=level is None),
                "generator": Lit(level),
            },
            [(labeled, "bind")],
            tag,
        )
        reattached.append(labeled)
        session._discard_temp(summary)
    if not reattached:
        # Nothing to extend: the result is the empty summary schema.
        empty = algebra.summarize(source, [group_col], aggs)
        session._step(
            "create", {"schema": list(empty.schema()), "rows": []}, [(target, "bind")], tag
        )
    elif len(reattached) == 1:
        order = [group_col] + [
            name for name in session.table(reattached[0]).names if name != group_col
        ]
        session._step(
            "rearrange",
            {"table": reattached[0], "column_order": order},
            [(target, "bind")],
            tag,
        )
    else:
        session._step(
            "extend", {"tables": list(reattached), "policy": "strict"}, [(target, "bind")], tag
        )
    for handle in parts + reattached:
        session._discard_temp(handle)


def _lookup_transform(session: Session, p: Dict[str, Any], target: str, tag: str) -> None:
    lookup_handle = p["lookup"]
    lookup = session.table(lookup_handle)
    key, value_column = p["key"], p["value_column"]
    temps = []
    extras = [c for c in lookup.names if c not in (key, value_column)]
    for name in extras:
        trimmed = session._temp_name("lookup")
        session._step(
            "delete_column", {"table": lookup_handle, "column": name}, [(trimmed, "bind")], tag
        )
        temps.append(trimmed)
        lookup_handle = trimmed
    joined = session._temp_name("joined")
    session._step(
        "supplement",
        {"left": p["table"], "right": lookup_handle, "key": key},
        [(joined, "bind")],
        tag,
    )
    session._step(
        "delete_column", {"table": joined, "column": key}, [(target, "bind")], tag
    )
    session._discard_temp(joined)
    for handle in temps:
        session._discard_temp(handle)


def _divide_and_conquer(session: Session, p: Dict[str, Any], target: str, tag: str) -> None:
    edits: Dict[str, Expr] = p["edits"]
    key = p["key"]
    fac = session._temp_name("facet")
    rest = session._temp_name("rest")
    session._step(
        "subset",
        {"table": p["table"], "predicate": p["facet"]},
        [(fac, "bind"), (rest, "bind")],
        tag,
    )
    edited = fac
    chain = []
    for column, gen in edits.items():
        gen = gen if isinstance(gen, Expr) else Lit(gen)
        step_out = session._temp_name("edited")
        session._step(
            "transform_column",
            {"table": edited, "column": column, "mapping": gen},
            [(step_out, "bind")],
            tag,
        )
        if edited != fac:
            chain.append(edited)
        edited = step_out
    conflict = set()
    for gen in edits.values():
        if isinstance(gen, Expr):
            conflict |= referenced_columns(gen)
    conflict -= set(edits.keys())
    parts = [fac, rest, edited]
    kept = []
    for handle in parts:
        present = [c for c in conflict if session.table(handle).has_column(c)]
        if present:
            keep = session._temp_name("kept")
            session._step(
                "split",
                {"table": handle, "key": key, "right_columns": sorted(present)},
                [(keep, "bind"), (f"{keep}__dropped", "discard")],
                tag,
            )
            kept.append(keep)
        else:
            kept.append(handle)
    session._step(
        "extend", {"tables": kept, "policy": "strict"}, [(target, "bind")], tag
    )
    for handle in dict.fromkeys(parts + chain + kept):
        if handle != target and session.env.is_bound(handle):
            session._discard_temp(handle)


def _split_compute_merge(session: Session, p: Dict[str, Any], target: str, tag: str) -> None:
    column = p["column"]
    names = list(p["new_names"])
    separated = session._temp_name("separated")
    session._step(
        "separate_column",
        {
            "table": p["table"],
            "column": column,
            "splitter": p["delimiter"],
            "new_names": names,
        },
        [(separated, "bind")],
        tag,
    )
    current = separated
    chain = [separated]
    for part, gen in p["edits"].items():
        gen = gen if isinstance(gen, Expr) else Lit(gen)
        step_out = session._temp_name("computed")
        session._step(
            "transform_column",
            {"table": current, "column": part, "mapping": gen},
            [(step_out, "bind")],
            tag,
        )
        chain.append(step_out)
        current = step_out
    session._step(
        "combine_columns",
        {
            "table": current,
            "columns": names,
            "combiner": p.get("sep") or p["delimiter"],
            "new_name": column,
        },
        [(target, "bind")],
        tag,
    )
    for handle in chain:
        session._discard_temp(handle)


_COMPOSITES: Dict[str, Callable] = {
    "filter": _filter,
    "group_aggregate": _group_aggregate,
    "lookup_transform": _lookup_transform,
    "divide_and_conquer": _divide_and_conquer,
    "split_compute_merge": _split_compute_merge,
}

"""Append-only provenance DAG of table versions and operations.

Nodes are table versions (schema snapshot and row count only, never the
data); edges are operations with their parameters. A node that leaves
the live environment is tombstoned rather than removed: the graph only
ever grows, and replaying a pipeline reproduces an isomorphic graph.

Exports: deterministic Graphviz DOT (composite expansions rendered as
clusters) and a JSON document that round-trips through
:func:`ProvenanceGraph.from_json`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .audit import Diagnostic, diagnostic_from_json
from .errors import TombstonedInput, UnknownNode
from .model import Table

SOURCE = "source"
INTERIOR = "interior"
SINK = "sink"

_PARAM_ELIDE_LEN = 120


def _render_param(value: Any) -> str:
    from .expr import Expr, to_source

    if isinstance(value, Expr):
        return to_source(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render_param(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_render_param(v)}" for k, v in value.items()) + "}"
    return repr(value) if isinstance(value, str) else str(value)


def _param_text(value: Any) -> str:
    """Stringified operation parameter; long literals elide to a hash."""
    text = _render_param(value)
    if len(text) > _PARAM_ELIDE_LEN:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
        return f"sha256:{digest}"
    return text


@dataclass
class ProvNode:
    """One table version. (handle, version) is unique across the graph."""

    id: int
    handle: str
    version: int
    schema: tuple  # of (name, dtype-short) pairs
    rows: int
    tombstone: bool = False
    role: str = INTERIOR

    def label(self) -> str:
        return f"{self.handle} v{self.version} ({self.rows}x{len(self.schema)})"

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "handle": self.handle,
            "version": self.version,
            "schema": [list(pair) for pair in self.schema],
            "rows": self.rows,
            "tombstone": self.tombstone,
            "role": self.role,
        }


@dataclass
class ProvEdge:
    """One operation application: input versions to output versions."""

    id: int
    op: str
    params: dict
    inputs: tuple
    outputs: tuple
    group: Optional[str] = None
    diagnostics: tuple = ()

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "op": self.op,
            "params": dict(self.params),
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "group": self.group,
            "diagnostics": list(self.diagnostics),
        }


class ProvenanceGraph:
    """Append-only DAG; acyclic by construction (outputs are fresh nodes)."""

    def __init__(self) -> None:
        self.nodes: Dict[int, ProvNode] = {}
        self.edges: List[ProvEdge] = []
        self.diagnostics: List[Diagnostic] = []
        self._next_node = 1
        self._next_edge = 1
        self._versions: Dict[str, int] = {}

    # -- recording ------------------------------------------------------

    def record(
        self,
        op: str,
        params: Dict[str, Any],
        input_ids: Sequence[int],
        outputs: Sequence[Tuple[str, Table]],
        group: Optional[str] = None,
        tombstoned_outputs: Iterable[str] = (),
    ) -> Tuple[ProvEdge, List[int]]:
        """Append one operation edge plus fresh nodes for its outputs."""
        for node_id in input_ids:
            node = self.node(node_id)
            if node.tombstone:
                raise TombstonedInput(
                    f"node {node_id} ({node.label()}) is tombstoned"
                )
        dead = set(tombstoned_outputs)
        out_ids = []
        for handle, table in outputs:
            version = self._versions.get(handle, 0) + 1
            self._versions[handle] = version
            node = ProvNode(
                id=self._next_node,
                handle=handle,
                version=version,
                schema=tuple((c.name, c.dtype.short()) for c in table.columns),
                rows=table.row_count,
                tombstone=handle in dead,
                role=SOURCE if not input_ids else INTERIOR,
            )
            self.nodes[node.id] = node
            out_ids.append(node.id)
            self._next_node += 1
        edge = ProvEdge(
            id=self._next_edge,
            op=op,
            params={k: _param_text(v) for k, v in params.items()},
            inputs=tuple(input_ids),
            outputs=tuple(out_ids),
            group=group,
        )
        self.edges.append(edge)
        self._next_edge += 1
        return edge, out_ids

    def node(self, node_id: int) -> ProvNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no provenance node {node_id}") from None

    def tombstone(self, node_id: int) -> None:
        self.node(node_id).tombstone = True

    def mark_sink(self, node_id: int) -> None:
        self.node(node_id).role = SINK

    def attach_diagnostics(self, edge: ProvEdge, diagnostics: Sequence[Diagnostic]) -> List[Diagnostic]:
        """Assign ids, link findings to the edge, and index them."""
        attached = []
        for d in diagnostics:
            stamped = d.attached(len(self.diagnostics) + 1, edge.id if edge else None)
            self.diagnostics.append(stamped)
            attached.append(stamped)
        if edge is not None and attached:
            edge.diagnostics = edge.diagnostics + tuple(d.id for d in attached)
        return attached

    def add_diagnostic(self, diagnostic: Diagnostic) -> Diagnostic:
        """Index a pull-based audit finding with no producing edge."""
        stamped = diagnostic.attached(len(self.diagnostics) + 1, diagnostic.source)
        self.diagnostics.append(stamped)
        return stamped

    # -- queries ----------------------------------------------------------

    def producers(self) -> Dict[int, List[ProvEdge]]:
        out: Dict[int, List[ProvEdge]] = {}
        for edge in self.edges:
            for node_id in edge.outputs:
                out.setdefault(node_id, []).append(edge)
        return out

    def lineage(self, node_id: int, direction: str) -> Set[int]:
        """Transitive closure of ancestors or descendants of a node."""
        if direction not in ("ancestors", "descendants"):
            raise UnknownNode(f"unknown direction {direction!r}")
        self.node(node_id)
        step: Dict[int, Set[int]] = {}
        for edge in self.edges:
            if direction == "ancestors":
                for out in edge.outputs:
                    step.setdefault(out, set()).update(edge.inputs)
            else:
                for inp in edge.inputs:
                    step.setdefault(inp, set()).update(edge.outputs)
        seen: Set[int] = set()
        frontier = [node_id]
        while frontier:
            current = frontier.pop()
            for nxt in step.get(current, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def toposort(self) -> List[int]:
        """Node ids in a topological order; raises if a cycle exists."""
        indeg = {node_id: 0 for node_id in self.nodes}
        succ: Dict[int, List[int]] = {node_id: [] for node_id in self.nodes}
        for edge in self.edges:
            for a in edge.inputs:
                for b in edge.outputs:
                    succ[a].append(b)
                    indeg[b] += 1
        ready = sorted(n for n, d in indeg.items() if d == 0)
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for b in succ[n]:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(b)
            ready.sort()
        if len(order) != len(self.nodes):
            raise UnknownNode("provenance graph contains a cycle")
        return order

    def validate(self) -> None:
        """Structural invariants: ids, acyclicity, single producing edge."""
        produced: Dict[int, int] = {}
        for edge in self.edges:
            for node_id in edge.inputs + edge.outputs:
                self.node(node_id)
            for node_id in edge.outputs:
                if node_id in produced:
                    raise UnknownNode(
                        f"node {node_id} produced by edges {produced[node_id]} and {edge.id}"
                    )
                produced[node_id] = edge.id
        self.toposort()
        seen_versions = set()
        for node in self.nodes.values():
            key = (node.handle, node.version)
            if key in seen_versions:
                raise UnknownNode(f"duplicate (handle, version) {key}")
            seen_versions.add(key)

    def live_count(self) -> int:
        return sum(1 for n in self.nodes.values() if not n.tombstone)

    # -- export -----------------------------------------------------------

    def export_dot(self) -> str:
        """Graphviz digraph, layered left to right; deterministic output."""
        lines = ["digraph provenance {", "  rankdir=LR;", "  node [shape=box];"]
        grouped: Dict[str, List[int]] = {}
        for edge in self.edges:
            if edge.group:
                grouped.setdefault(edge.group, []).extend(edge.outputs)
        in_cluster = {n for members in grouped.values() for n in members}

        def node_line(node: ProvNode, indent: str) -> str:
            attrs = [f'label="{node.label()}"']
            if node.tombstone:
                attrs.append("style=dashed")
                attrs.append("color=gray")
            if node.role == SINK:
                attrs.append("peripheries=2")
            return f'{indent}n{node.id} [{", ".join(attrs)}];'

        for node_id in sorted(self.nodes):
            if node_id not in in_cluster:
                lines.append(node_line(self.nodes[node_id], "  "))
        for i, (group, members) in enumerate(sorted(grouped.items())):
            lines.append(f"  subgraph cluster_{i} {{")
            lines.append(f'    label="{group}";')
            for node_id in sorted(set(members)):
                lines.append(node_line(self.nodes[node_id], "    "))
            lines.append("  }")
        for edge in self.edges:
            for a in edge.inputs:
                for b in edge.outputs:
                    lines.append(f'  n{a} -> n{b} [label="{edge.op}"];')
            if not edge.inputs and not edge.outputs:
                continue
        lines.append("}")
        return "\n".join(lines) + "\n"

    def export_json(self) -> str:
        doc = {
            "format": "tabletide-provenance",
            "version": 1,
            "nodes": [self.nodes[i].to_json() for i in sorted(self.nodes)],
            "edges": [e.to_json() for e in self.edges],
            "diagnostics": [d.to_json() for d in self.diagnostics],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ProvenanceGraph":
        doc = json.loads(text)
        if doc.get("format") != "tabletide-provenance":
            raise UnknownNode("not a tabletide provenance document")
        graph = cls()
        for n in doc["nodes"]:
            node = ProvNode(
                id=n["id"],
                handle=n["handle"],
                version=n["version"],
                schema=tuple(tuple(pair) for pair in n["schema"]),
                rows=n["rows"],
                tombstone=n["tombstone"],
                role=n["role"],
            )
            graph.nodes[node.id] = node
            graph._versions[node.handle] = max(
                graph._versions.get(node.handle, 0), node.version
            )
        graph._next_node = max(graph.nodes, default=0) + 1
        for e in doc["edges"]:
            graph.edges.append(
                ProvEdge(
                    id=e["id"],
                    op=e["op"],
                    params=dict(e["params"]),
                    inputs=tuple(e["inputs"]),
                    outputs=tuple(e["outputs"]),
                    group=e.get("group"),
                    diagnostics=tuple(e.get("diagnostics", ())),
                )
            )
        graph._next_edge = max((e.id for e in graph.edges), default=0) + 1
        for d in doc.get("diagnostics", []):
            graph.diagnostics.append(diagnostic_from_json(d))
        return graph

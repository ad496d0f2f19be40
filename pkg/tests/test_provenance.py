"""Provenance graph: recording, lineage, DOT and JSON export."""

from __future__ import annotations

import pytest

from tabletide import registry
from tabletide.dsl import parse_expression
from tabletide.engine import Session
from tabletide.errors import TombstonedInput, UnknownNode
from tabletide.provenance import ProvenanceGraph

from conftest import T, random_table


def _graph_with_chain(n: int) -> ProvenanceGraph:
    graph = ProvenanceGraph()
    _, ids = graph.record("create_table", {}, [], [("t", T([("a", "int")]))])
    prev = ids[0]
    for i in range(n - 1):
        _, ids = graph.record(
            "rearrange", {}, [prev], [(f"t{i}", T([("a", "int")]))]
        )
        prev = ids[0]
    return graph


class TestRecord:
    def test_load_then_filter_shape(self):
        session = Session()
        session.add_table(T([("a", "int")], [(1,), (2,)]), "t", op="load_csv")
        session.apply("filter", {"table": "t", "predicate": parse_expression("a == 1")}, ["f"])
        graph = session.graph
        assert len(graph.nodes) == 3  # t, f, discarded rest
        assert len(graph.edges) == 2  # load (0->1), subset (1->2)
        load, subset = graph.edges
        assert (len(load.inputs), len(load.outputs)) == (0, 1)
        assert (len(subset.inputs), len(subset.outputs)) == (1, 2)

    def test_extend_cardinality(self):
        session = Session()
        for name in ("a", "b", "c"):
            session.add_table(T([("x", "int")], [(1,)]), name, op="load_csv")
        session.apply("extend", {"tables": ["a", "b", "c"]}, ["all"])
        edge = session.graph.edges[-1]
        assert len(edge.inputs) == 3
        assert len(edge.outputs) == 1

    def test_tombstoned_input_rejected(self):
        graph = ProvenanceGraph()
        _, ids = graph.record("create_table", {}, [], [("t", T([("a", "int")]))])
        graph.tombstone(ids[0])
        with pytest.raises(TombstonedInput):
            graph.record("rearrange", {}, ids, [("u", T([("a", "int")]))])

    def test_unknown_node(self):
        graph = ProvenanceGraph()
        with pytest.raises(UnknownNode):
            graph.record("rearrange", {}, [99], [("u", T([("a", "int")]))])

    def test_param_elision_for_large_literals(self):
        graph = ProvenanceGraph()
        edge, _ = graph.record(
            "create_table", {"rows": ["x" * 500]}, [], [("t", T([("a", "int")]))]
        )
        assert edge.params["rows"].startswith("sha256:")


class TestLineage:
    def test_source_has_no_ancestors(self):
        graph = _graph_with_chain(4)
        assert graph.lineage(1, "ancestors") == set()

    def test_chain_ancestors(self):
        graph = _graph_with_chain(4)
        last = max(graph.nodes)
        assert graph.lineage(last, "ancestors") == {1, 2, 3}

    def test_matches_bfs_oracle_on_random_dags(self, rng):
        # Oracle: plain BFS over an adjacency list built independently.
        for _ in range(20):
            graph = ProvenanceGraph()
            node_ids = []
            _, ids = graph.record("create_table", {}, [], [("n0", T([("a", "int")]))])
            node_ids.extend(ids)
            for i in range(1, 12):
                k = rng.randint(1, min(3, len(node_ids)))
                inputs = rng.sample(node_ids, k)
                op = "extend" if k > 1 else "rearrange"
                _, ids = graph.record(op, {}, inputs, [(f"n{i}", T([("a", "int")]))])
                node_ids.extend(ids)
            adjacency: dict = {}
            for edge in graph.edges:
                for a in edge.inputs:
                    for b in edge.outputs:
                        adjacency.setdefault(a, set()).add(b)

            def bfs(start, adj):
                seen, frontier = set(), [start]
                while frontier:
                    cur = frontier.pop()
                    for nxt in adj.get(cur, ()):
                        if nxt not in seen:
                            seen.add(nxt)
                            frontier.append(nxt)
                return seen

            reverse: dict = {}
            for a, outs in adjacency.items():
                for b in outs:
                    reverse.setdefault(b, set()).add(a)
            probe = rng.choice(node_ids)
            assert graph.lineage(probe, "descendants") == bfs(probe, adjacency)
            assert graph.lineage(probe, "ancestors") == bfs(probe, reverse)

    def test_toposort_succeeds_after_pipelines(self, rng):
        session = Session()
        session.add_table(random_table(rng, max_cols=3, max_rows=10, min_rows=1), "t")
        session.apply("rearrange", {"table": "t", "sort_keys": [("c0", "asc")]}, ["s"])
        session.apply("delete_row", {"table": "s", "selector": [0]}, ["d"])
        order = session.graph.toposort()
        assert len(order) == len(session.graph.nodes)


class TestDotExport:
    def test_empty_graph_skeleton(self):
        text = ProvenanceGraph().export_dot()
        assert text.startswith("digraph")
        assert text.count("{") == text.count("}")
        assert "->" not in text

    def test_two_node_chain_single_edge_line(self):
        graph = _graph_with_chain(2)
        text = graph.export_dot()
        assert text.count("->") == 1
        assert 'label="rearrange"' in text

    def test_node_labels_carry_shape(self):
        graph = ProvenanceGraph()
        graph.record("create_table", {}, [], [("usage", T([("a", "int")], [(1,), (2,)]))])
        assert 'label="usage v1 (2x1)"' in graph.export_dot()

    def test_deterministic(self):
        a = _graph_with_chain(5).export_dot()
        b = _graph_with_chain(5).export_dot()
        assert a == b


class TestJsonExport:
    def test_round_trip_random_graphs(self, rng):
        for _ in range(10):
            graph = ProvenanceGraph()
            node_ids = []
            for i in range(rng.randint(1, 4)):
                _, ids = graph.record(
                    "create_table", {}, [], [(f"s{i}", random_table(rng, 3, 5))]
                )
                node_ids.extend(ids)
            for i in range(rng.randint(0, 6)):
                inputs = [rng.choice(node_ids)]
                _, ids = graph.record(
                    "rearrange", {"i": i}, inputs, [(f"d{i}", T([("a", "int")]))]
                )
                node_ids.extend(ids)
            if node_ids:
                graph.tombstone(node_ids[0])
                graph.mark_sink(node_ids[-1])
            text = graph.export_json()
            again = ProvenanceGraph.from_json(text)
            assert again.export_json() == text

    def test_empty_graph(self):
        import json

        doc = json.loads(ProvenanceGraph().export_json())
        assert doc["nodes"] == []
        assert doc["edges"] == []
        assert doc["diagnostics"] == []

    def test_document_fields(self):
        import json

        graph = _graph_with_chain(2)
        doc = json.loads(graph.export_json())
        assert doc["format"] == "tabletide-provenance"
        node = doc["nodes"][0]
        assert set(node) == {"id", "handle", "version", "schema", "rows", "tombstone", "role"}
        edge = doc["edges"][0]
        assert set(edge) == {"id", "op", "params", "inputs", "outputs", "group", "diagnostics"}


class TestSessionInvariants:
    def test_live_nodes_match_environment(self, rng):
        session = Session()
        session.add_table(
            T([("g", "text"), ("v", "int")], [("a", 1), ("b", 2), ("a", 3)]), "t"
        )
        session.apply("filter", {"table": "t", "predicate": parse_expression("v > 1")}, ["f"])
        session.apply(
            "group_aggregate",
            {"table": "t", "group": "g", "aggs": [(__import__("tabletide").Aggregator("count"), "n")]},
            ["g1"],
        )
        session.delete("f")
        assert session.graph.live_count() == len(session.env)
        session.graph.validate()

    def test_rebind_tombstones_old_version(self):
        session = Session()
        session.add_table(T([("a", "int")], [(1,)]), "t")
        session.apply("create_row", {"table": "t", "values": (2,)}, ["t"])
        versions = [n for n in session.graph.nodes.values() if n.handle == "t"]
        assert len(versions) == 2
        assert versions[0].tombstone and not versions[1].tombstone
        assert session.graph.live_count() == len(session.env) == 1

    def test_edge_arities_match_registry(self):
        session = Session()
        session.add_table(T([("g", "text"), ("v", "int")], [("a", 1), ("b", 2)]), "t")
        session.apply("subset", {"table": "t", "predicate": parse_expression("v > 1")}, ["m", "r"])
        session.apply("split", {"table": "t", "key": "g", "right_columns": ["v"]}, ["l", "rr"])
        session.apply("extend", {"tables": ["m", "r"]}, ["back"])
        registry.check_edge_arities(session.graph)

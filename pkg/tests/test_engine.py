"""Session engine: previews, handle rules, parameter validation."""

from __future__ import annotations

import pytest

from tabletide.algebra import Aggregator
from tabletide.dsl import parse_expression
from tabletide.engine import Session
from tabletide.errors import (
    NameCollision,
    TypeMismatch,
    UnknownHandle,
    UnknownOperation,
)

from conftest import T


@pytest.fixture
def session():
    s = Session()
    s.add_table(T([("g", "text"), ("v", "int")], [("a", 1), ("b", 2), ("a", 3)]), "t")
    return s


class TestApply:
    def test_unknown_operation(self, session):
        with pytest.raises(UnknownOperation):
            session.apply("frobnicate", {}, ["x"])

    def test_missing_required_param(self, session):
        with pytest.raises(TypeMismatch):
            session.apply("subset", {"table": "t"}, ["a", "b"])

    def test_unknown_param_rejected(self, session):
        with pytest.raises(UnknownOperation):
            session.apply(
                "filter",
                {"table": "t", "predicate": parse_expression("v > 1"), "bogus": 1},
                ["f"],
            )

    def test_wrong_output_count(self, session):
        with pytest.raises(NameCollision):
            session.apply(
                "subset", {"table": "t", "predicate": parse_expression("v > 1")}, ["only"]
            )

    def test_unbound_input(self, session):
        with pytest.raises(UnknownHandle):
            session.apply("delete_column", {"table": "ghost", "column": "v"}, ["x"])

    def test_invalid_output_name(self, session):
        with pytest.raises(NameCollision):
            session.apply("filter", {"table": "t", "predicate": parse_expression("v > 1")}, ["9bad"])

    def test_decompose_binds_prefixed_handles(self, session):
        outcome = session.apply("decompose", {"table": "t", "column": "g"}, ["parts"])
        assert outcome.handles == ["parts_a", "parts_b"]
        assert session.table("parts_a").row_count == 2

    def test_decompose_null_label_slug(self, session):
        session.apply(
            "transform_row",
            {"table": "t", "selector": [0], "edits": {"g": None}},
            ["t2"],
        )
        outcome = session.apply("decompose", {"table": "t2", "column": "g"}, ["p"])
        assert "p_null" in outcome.handles


class TestPreview:
    def test_preview_leaves_session_untouched(self, session):
        nodes_before = len(session.graph.nodes)
        handles_before = session.env.handles()
        outcome = session.preview(
            "subset", {"table": "t", "predicate": parse_expression("v > 1")}, ["m", "r"]
        )
        assert [h for h, _ in outcome.outputs] == ["m", "r"]
        assert outcome.outputs[0][1].row_count == 2
        assert session.env.handles() == handles_before
        assert len(session.graph.nodes) == nodes_before

    def test_preview_composite(self, session):
        outcome = session.preview(
            "group_aggregate",
            {"table": "t", "group": "g", "aggs": [(Aggregator("sum", "v"), "s")]},
            ["out"],
        )
        assert dict(
            zip(
                outcome.outputs[0][1].column("g").cells,
                outcome.outputs[0][1].column("s").cells,
            )
        ) == {"a": 4, "b": 2}
        assert not session.env.is_bound("out")

    def test_interleaved_previews_do_not_change_final_state(self, session):
        session.preview("filter", {"table": "t", "predicate": parse_expression("v > 1")}, ["f"])
        session.apply("filter", {"table": "t", "predicate": parse_expression("v > 1")}, ["f"])
        session.preview("delete_column", {"table": "f", "column": "g"}, ["g2"])
        export_a = session.graph.export_json()
        clean = Session()
        clean.add_table(
            T([("g", "text"), ("v", "int")], [("a", 1), ("b", 2), ("a", 3)]), "t"
        )
        clean.apply("filter", {"table": "t", "predicate": parse_expression("v > 1")}, ["f"])
        assert clean.graph.export_json() == export_a


class TestDiagnosticsLog:
    def test_diagnostics_attached_to_edges(self, session):
        session.add_table(T([("g", "text"), ("w", "int")], [("a", 9)]), "right")
        outcome = session.apply(
            "match", {"left": "t", "right": "right", "key": "g"}, ["joined"]
        )
        d = outcome.diagnostics[0]
        assert d.id == 1
        assert d.source == outcome.edge_ids[0]
        edge = next(e for e in session.graph.edges if e.id == d.source)
        assert d.id in edge.diagnostics
        assert session.diagnostics == [d]

"""Audit checks: equality tests, schema drift, key uniqueness, profiling."""

from __future__ import annotations

import pytest

from tabletide import audit
from tabletide.errors import NotNumeric

from conftest import T, random_table


def _arrivals(rows):
    return T([("country", "text"), ("arrivals", "int")], rows)


class TestEqualityTotal:
    def test_reported_delta_of_four(self):
        religion = _arrivals([("total", 672004)])
        destination = _arrivals([("total", 672000)])
        d = audit.test_equality_total(religion, destination, "arrivals")
        assert d is not None and d.kind == "EqualityMismatch"
        assert d.payload["delta"] == 4

    def test_identical_tables_pass(self):
        t = _arrivals([("a", 1), ("b", 2)])
        assert audit.test_equality_total(t, t, "arrivals") is None

    def test_equal_sums_from_different_rows_pass(self):
        # Constructed counterexample: total equality is insufficient.
        a = _arrivals([("x", 4), ("y", 6)])
        b = _arrivals([("x", 9), ("y", 1)])
        assert audit.test_equality_total(a, b, "arrivals") is None

    def test_requires_numeric(self):
        t = T([("c", "text")], [("x",)])
        with pytest.raises(NotNumeric):
            audit.test_equality_total(t, t, "c")

    def test_float_default_tolerance_is_relative(self):
        a = T([("v", "float")], [(1e12,)])
        b = T([("v", "float")], [(1e12 + 1e-3,)])  # well inside 1e-9 relative
        assert audit.test_equality_total(a, b, "v") is None


class TestEqualityGrouped:
    def test_per_group_deltas(self):
        # Destination has one more from Iran, five fewer from Iraq.
        religion = _arrivals([("Iran", 100), ("Iraq", 205), ("Syria", 50)])
        destination = _arrivals([("Iran", 101), ("Iraq", 200), ("Syria", 50)])
        d = audit.test_equality_grouped(destination, religion, "country", "arrivals")
        assert d is not None
        assert d.payload["deltas"] == {"Iran": 1, "Iraq": -5}

    def test_identical_pass(self):
        t = _arrivals([("a", 1), ("b", 2)])
        assert audit.test_equality_grouped(t, t, "country", "arrivals") is None

    def test_group_missing_one_side_alignment_oracle(self):
        # Oracle: outer alignment of levels {a} and {a, b}; b's sum on the
        # left counts as zero and the group is flagged missing.
        a = _arrivals([("a", 1)])
        b = _arrivals([("a", 1), ("b", 5)])
        d = audit.test_equality_grouped(a, b, "country", "arrivals")
        assert d is not None
        assert d.payload["deltas"] == {"b": -5}
        assert d.payload["missing_in_left"] == ["b"]
        assert d.payload["missing_in_right"] == []

    def test_grouped_pass_implies_total_pass(self, rng):
        for _ in range(50):
            rows_a = [(g, rng.randint(0, 9)) for g in "abcd"]
            rows_b = [(g, v) for g, v in rows_a]
            a, b = _arrivals(rows_a), _arrivals(rows_b)
            if audit.test_equality_grouped(a, b, "country", "arrivals") is None:
                assert audit.test_equality_total(a, b, "arrivals") is None

    def test_total_pass_grouped_fail_counterexample(self):
        a = _arrivals([("x", 4), ("y", 6)])
        b = _arrivals([("x", 9), ("y", 1)])
        assert audit.test_equality_total(a, b, "arrivals") is None
        d = audit.test_equality_grouped(a, b, "country", "arrivals")
        assert d is not None
        assert d.payload["deltas"] == {"x": -5, "y": 5}


class TestSchemaDrift:
    def test_column_set_changes(self):
        a = T([("a", "int"), ("b", "int")])
        b = T([("a", "int"), ("c", "int")])
        d = audit.detect_schema_drift(a, b)
        assert d.payload["removed_columns"] == ["b"]
        assert d.payload["added_columns"] == ["c"]

    def test_new_level_detected_via_set_difference_oracle(self):
        a = T([("c", "text")], [("x",)])
        b = T([("c", "text")], [("x",), ("X",)])
        expected_added = sorted({"x", "X"} - {"x"})
        d = audit.detect_schema_drift(a, b)
        assert d.payload["level_changes"]["c"]["added"] == expected_added

    def test_identity_passes(self, rng):
        for _ in range(20):
            t = random_table(rng, max_cols=4, max_rows=10)
            assert audit.detect_schema_drift(t, t) is None

    def test_dtype_change(self):
        a = T([("a", "int")], [(1,)])
        b = T([("a", "text")], [("1",)])
        d = audit.detect_schema_drift(a, b)
        assert d.payload["dtype_changes"] == [
            {"column": "a", "from": "integer", "to": "text"}
        ]

    def test_symmetry_up_to_swap(self, rng):
        for _ in range(20):
            a = random_table(rng, max_cols=4, max_rows=8)
            b = random_table(rng, max_cols=4, max_rows=8)
            ab = audit.detect_schema_drift(a, b)
            ba = audit.detect_schema_drift(b, a)
            assert (ab is None) == (ba is None)
            if ab is not None:
                assert ab.payload["added_columns"] == ba.payload["removed_columns"]
                assert ab.payload["removed_columns"] == ba.payload["added_columns"]


class TestKeyUniqueness:
    def test_forced_duplicate(self):
        t = T([("gn", "text"), ("fn", "text")], [("A", "B"), ("A", "B")])
        d = audit.check_key_uniqueness(t, ["gn", "fn"])
        assert d.kind == "KeyCollision"
        assert d.payload["duplicates"] == [{"key": ["A", "B"], "count": 2}]

    def test_unique_passes(self):
        t = T([("gn", "text"), ("fn", "text")], [("A", "B"), ("A", "C")])
        assert audit.check_key_uniqueness(t, ["gn", "fn"]) is None

    def test_null_keys_compare_equal(self):
        # Rule check: enumerate tuples; (None, "x") == (None, "x").
        t = T([("a", "text"), ("b", "text")], [(None, "x"), (None, "x")])
        d = audit.check_key_uniqueness(t, ["a", "b"])
        assert d is not None
        assert d.payload["duplicates"][0]["count"] == 2


class TestProfile:
    def test_int_column_with_null(self):
        t = T([("a", "int")], [(1,), (None,)])
        report = audit.profile_summary(t)
        col = report.columns[0]
        assert (col.nulls, col.distinct, col.minimum, col.maximum) == (1, 1, 1, 1)

    def test_empty_table(self):
        report = audit.profile_summary(T([("a", "int")]))
        assert report.rows == 0
        assert report.columns[0].distinct == 0

    def test_distinct_matches_brute_force(self, rng):
        for _ in range(25):
            t = random_table(rng, max_cols=4, max_rows=30)
            report = audit.profile_summary(t)
            for col, profile in zip(t.columns, report.columns):
                assert profile.distinct == len(
                    {c for c in col.cells if c is not None}
                )
                assert profile.nulls == sum(1 for c in col.cells if c is None)

    def test_render_lines(self):
        t = T([("a", "int")], [(1,), (2,)])
        text = audit.profile_summary(t).render()
        assert "rows: 2" in text
        assert "a: int?" in text


class TestReportFormat:
    def test_round_trip(self):
        t = T([("gn", "text")], [("A",), ("A",)])
        d = audit.check_key_uniqueness(t, ["gn"])
        text = audit.render_report([d])
        parsed = audit.parse_report(text)
        assert len(parsed) == 1
        assert parsed[0].kind == d.kind
        assert parsed[0].payload["duplicates"] == [{"key": ["A"], "count": 2}]

    def test_read_only(self):
        a = T([("x", "int")], [(1,), (2,)])
        b = T([("x", "int")], [(3,)])
        before = (a.schema(), list(a.rows()), b.schema(), list(b.rows()))
        audit.test_equality_total(a, b, "x")
        audit.detect_schema_drift(a, b)
        audit.check_key_uniqueness(a, ["x"])
        audit.profile_summary(a)
        assert (a.schema(), list(a.rows()), b.schema(), list(b.rows())) == before

"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

from __future__ import annotations

import random
import re
import shutil
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from tabletide import algebra, audit, dsl, io as tio, registry
from tabletide.algebra import Aggregator, SchemaPolicy
from tabletide.dsl import parse_expression
from tabletide.engine import Session
from tabletide.model import DataType, Table, row_multiset_equal

from conftest import random_table

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


@contextmanager
def criterion(number: int, name: str, budget_seconds: float):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} {name}: FAIL", file=sys.stderr)
        raise
    elapsed = time.monotonic() - start
    assert elapsed < budget_seconds, (
        f"criterion {number} took {elapsed:.2f}s, budget {budget_seconds}s"
    )
    print(f"ACCEPTANCE {number} {name}: PASS ({elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 1. Framework coverage


def test_criterion_1_framework_coverage():
    with criterion(1, "framework coverage", 1.0):
        cells = registry.framework_cells()
        for op_class in registry.OP_CLASSES:
            for kind in registry.OBJECT_KINDS:
                assert cells.get((op_class, kind)), (
                    f"design-space cell ({op_class}, {kind}) has no operation"
                )
        assert len(cells) == 15

        named = [spec.framework_name for spec in registry.algebra_specs()]
        assert sorted(named) == sorted(registry.FRAMEWORK_OPERATIONS) or set(
            named
        ) == set(registry.FRAMEWORK_OPERATIONS)
        # 21 named operations; fold and unfold share the Reshape name.
        assert len(registry.FRAMEWORK_OPERATIONS) == 21
        assert set(registry.FRAMEWORK_OPERATIONS) == set(named)

        for spec in registry.algebra_specs():
            assert spec.bins == registry.CLASS_BINS[spec.op_class]
            expected_ins, expected_outs = {
                "create": ("zero", "one"),
                "delete": ("one", "zero"),
                "transform": ("one", "one"),
                "separate": ("one", "many"),
                "combine": ("many", "one"),
            }[spec.op_class]
            assert spec.bins == (expected_ins, expected_outs)


# ---------------------------------------------------------------------------
# 2. Divide-and-conquer tidying incident


def _tidy_oracle(usage: Table) -> Table:
    """Brute-force reshaping of the water fixture to tidy form."""
    rows = []
    for supplier, date, amount, amount_2013 in usage.rows():
        rows.append((supplier, date, amount))
    for supplier, date, amount, amount_2013 in usage.rows():
        year, month = date.split("-")
        if year == "2015":
            rows.append((supplier, f"2013-{month}", amount_2013))
    return Table.build(
        [
            ("supplier", DataType("text")),
            ("date", DataType("text")),
            ("amount", DataType("float")),
        ],
        rows,
    )


def test_criterion_2_tidying_incident(tmp_path):
    with criterion(2, "divide-and-conquer tidying", 1.0):
        shutil.copy(DATA / "water_usage.csv", tmp_path / "water_usage.csv")
        pipeline = dsl.parse((DATA / "water_tidy.wr").read_text())
        session = Session()
        report = dsl.execute(pipeline, session, base_dir=str(tmp_path))
        assert report.ok, report.error

        produced = tio.load_csv(tmp_path / "water_tidy.csv")
        usage = tio.load_csv(tmp_path / "water_usage.csv")
        assert usage.column("supplier").dtype.kind == "text"
        assert len(set(usage.column("supplier").cells)) >= 6
        oracle = _tidy_oracle(usage)
        assert produced.width == 3
        assert row_multiset_equal(produced, oracle)

        intermediates = [
            node
            for node in session.graph.nodes.values()
            if node.handle not in ("usage", "tidy")
        ]
        assert len(intermediates) >= 3
        session.graph.validate()


# ---------------------------------------------------------------------------
# 3. Lossy-join incident


def test_criterion_3_lossy_join_incident():
    with criterion(3, "lossy-join incident", 1.0):
        states = tio.load_csv(DATA / "state_population.csv")
        refugees = tio.load_csv(DATA / "refugee_arrivals.csv")
        assert states.row_count == 51
        assert refugees.row_count == 50

        # (a) the inner join silently drops Wyoming; the engine says so.
        inner = algebra.match_join(states, refugees, "state", "inner")
        assert inner.table.row_count == 50
        lossy = inner.diagnostics[0]
        assert lossy.kind == "LossyJoin"
        assert lossy.payload["dropped_keys"] == ["Wyoming"]

        # (b) supplement keeps all 51 rows, null-filling Wyoming.
        supp = algebra.supplement(states, refugees, "state")
        assert supp.table.row_count == 51
        wy = states.column("state").cells.index("Wyoming")
        assert supp.table.column("arrivals").cells[wy] is None
        unmatched = next(
            d for d in supp.diagnostics if d.kind == "UnmatchedLeftKeys"
        )
        assert unmatched.payload["keys"] == ["Wyoming"]

        # (c) totals differ by 4; groups differ by Iran +1, Iraq -5.
        religion = tio.load_csv(DATA / "arrivals_by_religion.csv")
        destination = tio.load_csv(DATA / "arrivals_by_destination.csv")
        total = audit.test_equality_total(religion, destination, "arrivals", tol=0)
        assert total is not None and total.payload["delta"] == 4
        grouped = audit.test_equality_grouped(
            destination, religion, "country", "arrivals", tol=0
        )
        assert grouped is not None
        assert grouped.payload["deltas"] == {"Iran": 1, "Iraq": -5}

        # (d) equal totals can hide unequal groups.
        a = Table.build(
            [("country", DataType("text")), ("arrivals", DataType("integer"))],
            [("x", 4), ("y", 6)],
        )
        b = Table.build(
            [("country", DataType("text")), ("arrivals", DataType("integer"))],
            [("x", 9), ("y", 1)],
        )
        assert audit.test_equality_total(a, b, "arrivals", tol=0) is None
        assert (
            audit.test_equality_grouped(a, b, "country", "arrivals", tol=0) is not None
        )


# ---------------------------------------------------------------------------
# 4. Algebraic law suite

N_CASES = 200


def _law_subset_partition(rng: random.Random) -> None:
    t = random_table(rng)
    bound = rng.randint(-40, 40)
    pred = parse_expression(f"c0 > {bound}" if t.column("c0").dtype.kind == "integer" else "c0 is null")
    matching, rest = algebra.subset(t, pred)
    assert matching.row_count + rest.row_count == t.row_count
    if t.row_count:
        together = algebra.extend([matching, rest]).table
        assert row_multiset_equal(together, t)


def _law_decompose_extend(rng: random.Random) -> None:
    t = random_table(rng, kinds=("text", "boolean", "date", "integer", "float"))
    non_numeric = [
        c.name for c in t.columns if c.dtype.kind in ("text", "boolean", "date")
    ]
    if not non_numeric:
        return
    column = rng.choice(non_numeric)
    parts = [part for _, part in algebra.decompose(t, column)]
    if len(parts) >= 2:
        back = algebra.extend(parts, SchemaPolicy("strict")).table
        assert row_multiset_equal(back, t)
    elif len(parts) == 1:
        assert row_multiset_equal(parts[0], t)
    else:
        assert t.row_count == 0


def _unique_key_table(rng: random.Random) -> Table:
    t = random_table(rng, max_cols=6, min_rows=0)
    key = algebra.create_column(
        t, "key", DataType("integer", nullable=False), parse_expression("0")
    )
    cells = tuple(range(t.row_count))
    from tabletide.model import Column

    cols = key.columns[:-1] + (Column("key", DataType("integer", False), cells),)
    return Table(cols)


def _law_split_supplement(rng: random.Random) -> None:
    t = _unique_key_table(rng)
    others = [name for name in t.names if name != "key"]
    if not others:
        return
    right = rng.sample(others, rng.randint(1, len(others)))
    left_part, right_part = algebra.split(t, "key", right)
    result = algebra.supplement(left_part, right_part, "key")
    assert result.diagnostics == ()
    assert row_multiset_equal(result.table, t)


def _law_fold_unfold(rng: random.Random) -> None:
    n_rows = rng.randint(1, 32)
    n_values = rng.randint(1, 4)
    kind = rng.choice(("integer", "float", "text"))
    from conftest import random_value

    schema = [("id", DataType("integer", nullable=False))]
    schema += [(f"v{i}", DataType(kind, nullable=False)) for i in range(n_values)]
    rows = [
        tuple([i] + [random_value(rng, kind) for _ in range(n_values)])
        for i in range(n_rows)
    ]
    t = Table.build(schema, rows)
    folded = algebra.reshape_fold(t, [f"v{i}" for i in range(n_values)], "k", "v")
    back = algebra.reshape_unfold(folded, "k", "v")
    assert row_multiset_equal(back, t)


def _law_group_aggregate(rng: random.Random) -> None:
    t = random_table(rng, max_cols=4, kinds=("text", "integer"), min_cols=2)
    group_candidates = [c.name for c in t.columns if c.dtype.kind == "text"]
    numeric = [c.name for c in t.columns if c.dtype.kind == "integer"]
    if not group_candidates:
        return
    group = group_candidates[0]
    aggs = [(Aggregator("count"), "n")]
    if numeric:
        aggs.append((Aggregator("sum", numeric[0]), "s"))
    session = Session()
    session.add_table(t, "t")
    session.apply("group_aggregate", {"table": "t", "group": group, "aggs": aggs}, ["out"])
    direct = algebra.summarize(t, [group], aggs)
    assert row_multiset_equal(session.table("out"), direct)


def _law_semi_anti(rng: random.Random) -> None:
    left = random_table(rng, max_cols=3, kinds=("integer", "text"), min_cols=1)
    right = random_table(rng, max_cols=2, kinds=("integer", "text"), min_cols=1)
    key_left = left.names[0]
    # Align the right key's name and kind with the left key.
    from tabletide.model import Column

    kind = left.column(key_left).dtype.kind
    cells = tuple(
        random_value_of(rng, kind) for _ in range(right.row_count)
    )
    right = Table((Column(key_left, DataType(kind), cells),))
    semi = algebra.match_join(left, right, key_left, "semi").table
    anti = algebra.match_join(left, right, key_left, "anti").table
    assert semi.row_count + anti.row_count == left.row_count
    if left.row_count:
        together = algebra.extend([semi, anti]).table
        assert row_multiset_equal(together, left)


def random_value_of(rng: random.Random, kind: str):
    from conftest import random_value

    return random_value(rng, kind) if rng.random() > 0.1 else None


def _law_extend_cardinality(rng: random.Random) -> None:
    n = rng.randint(2, 5)
    schema = [("a", DataType("integer")), ("b", DataType("text"))]
    tables = []
    for _ in range(n):
        rows = [
            (rng.randint(0, 9), rng.choice("xyz"))
            for _ in range(rng.randint(0, 16))
        ]
        tables.append(Table.build(schema, rows))
    out = algebra.extend(tables).table
    assert out.row_count == sum(t.row_count for t in tables)


def _law_no_silent_row_loss(rng: random.Random) -> None:
    from tabletide.model import Column

    kind = rng.choice(("integer", "text"))
    n_left = rng.randint(0, 24)
    left_cells = tuple(random_value_of(rng, kind) for _ in range(n_left))
    left = Table((Column("k", DataType(kind), left_cells),))
    right_values = list(dict.fromkeys(random_value_of(rng, kind) for _ in range(8)))
    right = Table(
        (
            Column("k", DataType(kind), tuple(right_values)),
            Column(
                "v",
                DataType("integer"),
                tuple(range(len(right_values))),
            ),
        )
    )
    for mode in ("inner", "semi", "anti"):
        result = algebra.match_join(left, right, "k", mode)
        out_rows = result.table.row_count
        dropped = 0
        for d in result.diagnostics:
            if d.kind == "LossyJoin":
                dropped = d.payload["dropped_rows"]
        assert out_rows + dropped == left.row_count


LAWS = [
    ("subset partition", _law_subset_partition),
    ("decompose/extend round trip", _law_decompose_extend),
    ("split/supplement round trip", _law_split_supplement),
    ("fold/unfold inversion", _law_fold_unfold),
    ("group_aggregate = summarize", _law_group_aggregate),
    ("semi + anti = left", _law_semi_anti),
    ("extend cardinality", _law_extend_cardinality),
    ("no silent row loss", _law_no_silent_row_loss),
]


def test_criterion_4_algebraic_laws():
    with criterion(4, "algebraic law suite", 60.0):
        for law_index, (name, law) in enumerate(LAWS):
            rng = random.Random(0xA11CE + law_index)
            for case in range(N_CASES):
                try:
                    law(rng)
                except AssertionError as exc:
                    raise AssertionError(f"law {name!r} case {case}: {exc}") from exc


# ---------------------------------------------------------------------------
# 5. Provenance suite


def _dot_reparse(text: str):
    """Minimal parser for the DOT dialect the exporter emits."""
    lines = [line.strip() for line in text.strip().splitlines()]
    assert lines[0].startswith("digraph")
    assert lines[-1] == "}"
    node_re = re.compile(r'^n(\d+) \[label="[^"]*"(?:, [a-z]+=\w+)*\];$')
    edge_re = re.compile(r'^n(\d+) -> n(\d+) \[label="[^"]+"\];$')
    nodes, edges = set(), []
    depth = 0
    for line in lines:
        depth += line.count("{") - line.count("}")
        if match := node_re.match(line):
            nodes.add(int(match.group(1)))
        elif match := edge_re.match(line):
            edges.append((int(match.group(1)), int(match.group(2))))
    assert depth == 0, "unbalanced braces"
    return nodes, edges


def _fig2_scale_session() -> Session:
    """A wrangling run at the scale of the observed two-sink workflow."""
    session = Session()
    schema = [("g", DataType("text")), ("v", DataType("integer"))]
    for i in range(4):
        rows = [(chr(97 + j % 3), i * 10 + j) for j in range(6)]
        session.add_table(Table.build(schema, rows), f"src{i}")
    session.apply("extend", {"tables": ["src0", "src1"]}, ["east"])
    session.apply("extend", {"tables": ["src2", "src3"]}, ["west"])
    session.apply(
        "subset",
        {"table": "east", "predicate": parse_expression("v > 5")},
        ["east_hi", "east_lo"],
    )
    session.apply(
        "subset",
        {"table": "west", "predicate": parse_expression("v > 15")},
        ["west_hi", "west_lo"],
    )
    for name in ("east_hi", "west_hi"):
        session.apply(
            "rearrange", {"table": name, "sort_keys": [("v", "desc")]}, [f"{name}_sorted"]
        )
    session.apply(
        "group_aggregate",
        {"table": "east_lo", "aggs": [(Aggregator("count"), "east_n")], "group": "g"},
        ["east_summary"],
    )
    session.apply(
        "group_aggregate",
        {"table": "west_lo", "aggs": [(Aggregator("count"), "west_n")], "group": "g"},
        ["west_summary"],
    )
    session.apply(
        "supplement", {"left": "east_summary", "right": "west_summary", "key": "g"},
        ["balance"],
    )
    session.mark_sink("balance")
    session.apply(
        "extend", {"tables": ["east_hi_sorted", "west_hi_sorted"]}, ["spotlight"]
    )
    session.mark_sink("spotlight")
    return session


def test_criterion_5_provenance_suite():
    with criterion(5, "provenance suite", 5.0):
        # Law-suite pipelines, driven through sessions this time.
        rng = random.Random(0xDA6)
        for _ in range(40):
            t = random_table(rng, max_cols=4, max_rows=24, kinds=("integer", "text"))
            session = Session()
            session.add_table(t, "t")
            session.apply(
                "subset",
                {"table": "t", "predicate": parse_expression("c0 is not null")},
                ["m", "r"],
            )
            session.apply("extend", {"tables": ["m", "r"]}, ["back"])
            if any(c.dtype.kind == "text" for c in t.columns):
                group = next(c.name for c in t.columns if c.dtype.kind == "text")
                session.apply(
                    "group_aggregate",
                    {"table": "t", "group": group, "aggs": [(Aggregator("count"), "n")]},
                    ["g"],
                )
            session.graph.validate()  # acyclic, unique producers
            registry.check_edge_arities(session.graph)
            assert session.graph.live_count() == len(session.env)
            assert session.graph.export_dot() == session.graph.export_dot()

        session = _fig2_scale_session()
        session.graph.validate()
        registry.check_edge_arities(session.graph)
        assert len(session.graph.nodes) >= 25
        sinks = [n for n in session.graph.nodes.values() if n.role == "sink"]
        assert len(sinks) == 2
        dot = session.graph.export_dot()
        nodes, edges = _dot_reparse(dot)
        assert nodes == set(session.graph.nodes)
        expected_edges = sum(
            len(e.inputs) * len(e.outputs) for e in session.graph.edges
        )
        assert len(edges) == expected_edges
        assert session.graph.export_dot() == dot


# ---------------------------------------------------------------------------
# 6. Language and I/O determinism


def _stable_random_table(rng: random.Random) -> Table:
    """Tables whose CSV round trip re-infers identical dtypes."""
    from conftest import random_value

    kinds = ("integer", "float", "text", "date")
    n_cols = rng.randint(1, 6)
    schema = [(f"c{i}", DataType(rng.choice(kinds))) for i in range(n_cols)]
    rows = []
    for _ in range(rng.randint(1, 40)):
        row = []
        for _, dtype in schema:
            if rng.random() < 0.1:
                row.append(None)
            else:
                row.append(random_value(rng, dtype.kind))
        rows.append(tuple(row))
    # Guarantee at least one unambiguous cell per column.
    anchor = []
    for _, dtype in schema:
        anchor.append(
            {"integer": 1, "float": 0.5, "text": "anchor", "date": None}[dtype.kind]
            if dtype.kind != "date"
            else __import__("datetime").date(2020, 1, 1)
        )
    rows.append(tuple(anchor))
    return Table.build(schema, rows)


def test_criterion_6_language_and_io(tmp_path):
    with criterion(6, "language and I/O determinism", 10.0):
        corpus = sorted(GOLDEN.glob("*.wr"))
        assert len(corpus) >= 20
        for path in corpus:
            pipeline = dsl.parse(path.read_text())
            printed = pipeline.render()
            assert dsl.parse(printed).render() == printed

        rng = random.Random(0x10E)
        for i in range(40):
            t = _stable_random_table(rng)
            path = tmp_path / f"t{i}.csv"
            tio.save_csv(t, path)
            back = tio.load_csv(path)
            assert back.schema() == tuple(
                (name, DataType(d.kind, True)) for name, d in t.schema()
            ) or all(
                back.column(c.name).dtype.kind == c.dtype.kind for c in t.columns
            )
            assert row_multiset_equal(back, t)

        shutil.copy(DATA / "water_usage.csv", tmp_path / "water_usage.csv")
        pipeline = dsl.parse((DATA / "water_tidy.wr").read_text())
        exports = []
        for _ in range(2):
            session = Session()
            report = dsl.execute(pipeline, session, base_dir=str(tmp_path))
            assert report.ok
            exports.append((tmp_path / "water_tidy.csv").read_bytes())
        assert exports[0] == exports[1]

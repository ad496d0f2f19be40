"""Registry mapping every operation to its design-space cell.

Each algebra operation carries its operation class (create, delete,
transform, separate, combine), the kind of data object it acts on
(table, column, row), and its input/output cardinality bin (zero, one,
many). The registry is the single source of truth for the pipeline
language, the HTTP service and the provenance arity checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from .errors import UnknownOperation

# Operation classes.
CREATE = "create"
DELETE = "delete"
TRANSFORM = "transform"
SEPARATE = "separate"
COMBINE = "combine"

OP_CLASSES = (CREATE, DELETE, TRANSFORM, SEPARATE, COMBINE)

# Data object kinds.
TABLE = "table"
COLUMN = "column"
ROW = "row"

OBJECT_KINDS = (TABLE, COLUMN, ROW)

# Cardinality bins.
ZERO = "zero"
ONE = "one"
MANY = "many"

#: Input/output bins per operation class.
CLASS_BINS = {
    CREATE: (ZERO, ONE),
    DELETE: (ONE, ZERO),
    TRANSFORM: (ONE, ONE),
    SEPARATE: (ONE, MANY),
    COMBINE: (MANY, ONE),
}


@dataclass(frozen=True)
class Param:
    """One operation parameter: name plus the shape the value must take.

    ``kind`` drives coercion of wire values (pipeline text, HTTP JSON)
    into engine objects: handle, handles, column, columns, names, name,
    expr, pred, selector, value, values, edits, gen_map, lookup, schema,
    sort_keys, aggs, splitter, string, int, choice.
    """

    name: str
    kind: str
    required: bool = True
    default: object = None
    choices: tuple = ()


@dataclass(frozen=True)
class OpSpec:
    """Metadata for one operation (algebra or composite)."""

    name: str
    framework_name: str  # canonical operation name in the design space
    op_class: str
    object_kind: str
    params: tuple
    outputs: int  # fixed named-output count; -1 for data-dependent fan-out
    table_inputs: tuple  # (min, max) table-level edge inputs, max None = unbounded
    table_outputs: tuple
    composite: bool = False
    summary: str = ""

    @property
    def bins(self) -> Tuple[str, str]:
        return CLASS_BINS[self.op_class]


def _spec(
    name,
    framework_name,
    op_class,
    object_kind,
    params,
    outputs=1,
    table_inputs=(1, 1),
    table_outputs=(1, 1),
    composite=False,
    summary="",
):
    return OpSpec(
        name=name,
        framework_name=framework_name,
        op_class=op_class,
        object_kind=object_kind,
        params=tuple(params),
        outputs=outputs,
        table_inputs=table_inputs,
        table_outputs=table_outputs,
        composite=composite,
        summary=summary,
    )


OPERATIONS = (
    # -- Create (0:1) ----------------------------------------------------
    _spec(
        "create", "Create", CREATE, TABLE,
        [Param("schema", "schema"), Param("rows", "values_rows", required=False, default=())],
        table_inputs=(0, 0),
        summary="define a table directly in the environment",
    ),
    _spec(
        "create_column", "Create", CREATE, COLUMN,
        [
            Param("table", "handle"),
            Param("name", "name"),
            Param("dtype", "dtype"),
            Param("generator", "expr"),
        ],
        summary="add a column from a constant or expression",
    ),
    _spec(
        "create_row", "Create", CREATE, ROW,
        [Param("table", "handle"), Param("values", "values")],
        summary="append one manually constructed row",
    ),
    # -- Delete (1:0) ------------------------------------------------------
    _spec(
        "delete_table", "Delete", DELETE, TABLE,
        [Param("table", "handle")],
        outputs=0,
        table_outputs=(0, 0),
        summary="remove a table from the environment (tombstoned in provenance)",
    ),
    _spec(
        "delete_column", "Delete", DELETE, COLUMN,
        [Param("table", "handle"), Param("column", "column")],
        summary="drop one column",
    ),
    _spec(
        "delete_row", "Delete", DELETE, ROW,
        [Param("table", "handle"), Param("selector", "selector")],
        summary="remove selected rows",
    ),
    # -- Transform (1:1) ---------------------------------------------------
    _spec(
        "rearrange", "Rearrange", TRANSFORM, TABLE,
        [
            Param("table", "handle"),
            Param("sort_keys", "sort_keys", required=False, default=()),
            Param("column_order", "columns", required=False),
        ],
        summary="sort rows and reorder columns without changing structure",
    ),
    _spec(
        "fold", "Reshape", TRANSFORM, TABLE,
        [
            Param("table", "handle"),
            Param("value_columns", "columns"),
            Param("key_name", "name"),
            Param("value_name", "name"),
        ],
        summary="collapse value columns into key-value rows",
    ),
    _spec(
        "unfold", "Reshape", TRANSFORM, TABLE,
        [
            Param("table", "handle"),
            Param("key_column", "column"),
            Param("value_column", "column"),
        ],
        summary="cast key levels out into columns",
    ),
    _spec(
        "transform_column", "Transform-C", TRANSFORM, COLUMN,
        [
            Param("table", "handle"),
            Param("column", "column"),
            Param("mapping", "expr_or_lookup"),
        ],
        summary="replace a column cell-wise",
    ),
    _spec(
        "transform_row", "Transform-R", TRANSFORM, ROW,
        [
            Param("table", "handle"),
            Param("selector", "selector"),
            Param("edits", "edits"),
        ],
        summary="patch cells of selected rows",
    ),
    # -- Separate (1:N) -----------------------------------------------------
    _spec(
        "subset", "Subset", SEPARATE, TABLE,
        [Param("table", "handle"), Param("predicate", "pred")],
        outputs=2,
        table_outputs=(2, 2),
        summary="divide rows into matching and rest",
    ),
    _spec(
        "decompose", "Decompose", SEPARATE, TABLE,
        [
            Param("table", "handle"),
            Param("column", "column"),
            Param("bins", "binspec", required=False),
        ],
        outputs=-1,
        # Data-dependent fan-out; an empty input legitimately yields no parts.
        table_outputs=(0, None),
        summary="partition into constituent tables by one column",
    ),
    _spec(
        "split", "Split", SEPARATE, TABLE,
        [
            Param("table", "handle"),
            Param("key", "column"),
            Param("right_columns", "columns"),
        ],
        outputs=2,
        table_outputs=(2, 2),
        summary="divide columns into two tables sharing the key",
    ),
    _spec(
        "separate_column", "Separate-C", SEPARATE, COLUMN,
        [
            Param("table", "handle"),
            Param("column", "column"),
            Param("splitter", "splitter"),
            Param("new_names", "names"),
        ],
        summary="split a composite column into components",
    ),
    _spec(
        "separate_row", "Separate-R", SEPARATE, ROW,
        [
            Param("table", "handle"),
            Param("column", "column"),
            Param("delimiter", "string"),
        ],
        summary="explode delimited cells into rows",
    ),
    # -- Combine (N:1) -------------------------------------------------------
    _spec(
        "extend", "Extend", COMBINE, TABLE,
        [
            Param("tables", "handles"),
            Param("policy", "choice", required=False, default="strict",
                  choices=("strict", "union")),
        ],
        table_inputs=(2, None),
        summary="concatenate tables row-wise",
    ),
    _spec(
        "supplement", "Supplement", COMBINE, TABLE,
        [
            Param("left", "handle"),
            Param("right", "handle"),
            Param("key", "column"),
        ],
        table_inputs=(2, 2),
        summary="left-preserving column merge (bijective key intent)",
    ),
    _spec(
        "match", "Match", COMBINE, TABLE,
        [
            Param("left", "handle"),
            Param("right", "handle"),
            Param("key", "column"),
            Param("mode", "choice", required=False, default="inner",
                  choices=("inner", "semi", "anti")),
        ],
        table_inputs=(2, 2),
        summary="inner/semi/anti join with lossy-join reporting",
    ),
    _spec(
        "combine_columns", "Combine-C", COMBINE, COLUMN,
        [
            Param("table", "handle"),
            Param("columns", "columns"),
            Param("combiner", "combiner"),
            Param("new_name", "name"),
        ],
        summary="map many columns into one",
    ),
    _spec(
        "summarize", "Summarize", COMBINE, ROW,
        [
            Param("table", "handle"),
            Param("group_columns", "columns", required=False, default=()),
            Param("aggs", "aggs"),
        ],
        summary="group rows and aggregate",
    ),
    _spec(
        "interpolate", "Interpolate", COMBINE, ROW,
        [
            Param("table", "handle"),
            Param("target", "column"),
            Param("method", "choice",
                  choices=("linear", "forward_fill", "group_mean")),
            Param("order", "column", required=False),
            Param("group_columns", "columns", required=False, default=()),
        ],
        summary="fill null cells from neighboring or grouped rows",
    ),
    # -- Composites ------------------------------------------------------------
    _spec(
        "filter", "Filter", SEPARATE, TABLE,
        [Param("table", "handle"), Param("predicate", "pred")],
        composite=True,
        summary="subset, keeping matches and discarding the rest",
    ),
    _spec(
        "group_aggregate", "GroupAggregate", COMBINE, ROW,
        [
            Param("table", "handle"),
            Param("group", "column"),
            Param("aggs", "aggs"),
        ],
        composite=True,
        summary="decompose, summarize each part, extend back together",
    ),
    _spec(
        "lookup_transform", "LookupTransform", COMBINE, TABLE,
        [
            Param("table", "handle"),
            Param("lookup", "handle"),
            Param("key", "column"),
            Param("value_column", "column"),
        ],
        composite=True,
        summary="supplement from a lookup table, then drop the raw key",
    ),
    _spec(
        "divide_and_conquer", "DivideAndConquer", SEPARATE, TABLE,
        [
            Param("table", "handle"),
            Param("facet", "pred"),
            Param("edits", "gen_map"),
            Param("key", "column"),
        ],
        composite=True,
        summary="facet, rewrite one part, split off conflicts, extend tidy",
    ),
    _spec(
        "split_compute_merge", "SplitComputeMerge", TRANSFORM, COLUMN,
        [
            Param("table", "handle"),
            Param("column", "column"),
            Param("delimiter", "string"),
            Param("new_names", "names"),
            Param("edits", "gen_map"),
            Param("sep", "string", required=False),
        ],
        composite=True,
        summary="separate a composite column, transform parts, combine back",
    ),
)

_BY_NAME = {spec.name: spec for spec in OPERATIONS}

#: The operation names of the design-space framework (21 in total).
FRAMEWORK_OPERATIONS = (
    "Create", "Create", "Create",
    "Delete", "Delete", "Delete",
    "Rearrange", "Reshape", "Transform-C", "Transform-R",
    "Subset", "Decompose", "Split", "Separate-C", "Separate-R",
    "Extend", "Supplement", "Match", "Combine-C", "Summarize", "Interpolate",
)


def get(name: str) -> OpSpec:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise UnknownOperation(
            f"unknown operation {name!r}; known: {sorted(_BY_NAME)}"
        ) from None


def names(include_composites: bool = True) -> list:
    return [
        spec.name
        for spec in OPERATIONS
        if include_composites or not spec.composite
    ]


def algebra_specs() -> list:
    return [spec for spec in OPERATIONS if not spec.composite]


def framework_cells() -> dict:
    """(op_class, object_kind) -> [operation names] over the algebra."""
    cells: dict = {}
    for spec in algebra_specs():
        cells.setdefault((spec.op_class, spec.object_kind), []).append(spec.name)
    return cells


def check_edge_arities(graph) -> None:
    """Verify every recorded edge against its operation's cardinality bins.

    Table-kind operations must show their class bins directly in the
    node counts; column- and row-kind operations rewrite one table into
    one table, except table creation (0 in) and deletion (0 out).
    """
    from .errors import UnknownOperation as _Unknown

    for edge in graph.edges:
        if edge.op not in _BY_NAME:
            # loads/fetches are creates recorded under their io name
            if edge.op in ("load_csv", "load_json", "fetch", "upload_csv", "create_table"):
                lo, hi = (0, 0), (1, 1)
            else:
                raise _Unknown(f"edge {edge.id} names unknown operation {edge.op!r}")
        else:
            spec = _BY_NAME[edge.op]
            lo, hi = spec.table_inputs, spec.table_outputs
        n_in, n_out = len(edge.inputs), len(edge.outputs)
        if n_in < lo[0] or (lo[1] is not None and n_in > lo[1]):
            raise _Unknown(
                f"edge {edge.id} ({edge.op}) has {n_in} inputs, expected {lo}"
            )
        if n_out < hi[0] or (hi[1] is not None and n_out > hi[1]):
            raise _Unknown(
                f"edge {edge.id} ({edge.op}) has {n_out} outputs, expected {hi}"
            )

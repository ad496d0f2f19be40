"""tabletide: multi-table data wrangling with provenance and audits.

The engine treats tables as first-class objects in a wrangling
environment and offers a 21-operation algebra over tables, columns and
rows, composite strategies built from it, audit checks with structured
diagnostics, an append-only provenance graph, a pipeline language, a
CLI, and an HTTP service for interactive preview-then-commit wrangling.
"""

from .model import (
    BOOLEAN,
    DATE,
    FLOAT,
    INTEGER,
    TEXT,
    Column,
    DataType,
    Environment,
    Table,
    compare_values,
    row_multiset_equal,
    tag_of,
)
from .algebra import Aggregator, BinSpec, OpResult, SchemaPolicy
from .audit import Diagnostic, profile_summary
from .engine import Session
from .errors import TableTideError

__version__ = "0.1.0"

__all__ = [
    "BOOLEAN",
    "DATE",
    "FLOAT",
    "INTEGER",
    "TEXT",
    "Aggregator",
    "BinSpec",
    "Column",
    "DataType",
    "Diagnostic",
    "Environment",
    "OpResult",
    "SchemaPolicy",
    "Session",
    "Table",
    "TableTideError",
    "compare_values",
    "profile_summary",
    "row_multiset_equal",
    "tag_of",
    "__version__",
]

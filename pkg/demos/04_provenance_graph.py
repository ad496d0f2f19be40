"""Watching the provenance DAG record a many-table wrangling session.

Every operation adds an edge; every table version is a node. Discarded
tables stay visible as tombstones, so the diagram never hides a flow.
"""

from tabletide import DataType, Session, Table
from tabletide.algebra import Aggregator
from tabletide.dsl import parse_expression

session = Session()
schema = [("region", DataType("text")), ("v", DataType("integer"))]
session.add_table(
    Table.build(schema, [("north", 3), ("south", 5), ("north", 8), ("east", 2)]),
    "survey_2015",
)
session.add_table(
    Table.build(schema, [("north", 4), ("south", 1), ("west", 9)]),
    "survey_2016",
)

session.apply("extend", {"tables": ["survey_2015", "survey_2016"]}, ["surveys"])
session.apply(
    "filter", {"table": "surveys", "predicate": parse_expression("v > 2")}, ["strong"]
)
session.apply(
    "group_aggregate",
    {"table": "strong", "group": "region", "aggs": [(Aggregator("sum", "v"), "total")]},
    ["by_region"],
)
session.mark_sink("by_region")

graph = session.graph
print(f"nodes: {len(graph.nodes)}, edges: {len(graph.edges)}")
print(f"live tables: {graph.live_count()} (== {len(session.env)} environment bindings)")

by_region_node = session.node_id("by_region")
ancestors = sorted(graph.lineage(by_region_node, "ancestors"))
print(f"everything feeding by_region: nodes {ancestors}")

print("\nDOT (composite steps are clustered; tombstones dashed):\n")
print(graph.export_dot())

print("JSON document (preview of the first node):")
import json

doc = json.loads(graph.export_json())
print(json.dumps(doc["nodes"][0], indent=2))

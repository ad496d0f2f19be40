"""How a state can silently fall off a chart, and the audits that catch it.

One table has rows for all 51 states (incl. DC); the arrivals table has
no Wyoming row. An inner join quietly drops it; supplement keeps it and
both paths report what happened.
"""

from tabletide import DataType, Table
from tabletide import algebra, audit

states = Table.build(
    [("state", DataType("text")), ("population", DataType("integer"))],
    [("California", 39_000_000), ("Texas", 29_000_000), ("Vermont", 640_000), ("Wyoming", 580_000)],
)
arrivals = Table.build(
    [("state", DataType("text")), ("arrivals", DataType("integer"))],
    [("California", 7_000), ("Texas", 6_500), ("Vermont", 300)],  # no Wyoming
)

inner = algebra.match_join(states, arrivals, "state", "inner")
print(f"inner join keeps {inner.table.row_count} of {states.row_count} rows")
for d in inner.diagnostics:
    print(f"  {d.severity}: {d.kind} -> {d.payload['dropped_keys']}")

supp = algebra.supplement(states, arrivals, "state")
print(f"\nsupplement keeps all {supp.table.row_count} rows; Wyoming is null-filled:")
for row in supp.table.rows():
    print("  ", row)
for d in supp.diagnostics:
    print(f"  {d.severity}: {d.kind} -> {d.payload['keys']}")

# Column totals can agree while groups disagree, so test both.
religion = Table.build(
    [("country", DataType("text")), ("arrivals", DataType("integer"))],
    [("Iran", 1200), ("Iraq", 1505)],
)
destination = Table.build(
    [("country", DataType("text")), ("arrivals", DataType("integer"))],
    [("Iran", 1201), ("Iraq", 1500)],
)
total = audit.test_equality_total(religion, destination, "arrivals")
print(f"\ntotal-sum check: delta = {total.payload['delta']}")
grouped = audit.test_equality_grouped(destination, religion, "country", "arrivals")
print(f"per-country check: {grouped.payload['deltas']}")

equal_totals_a = Table.build(
    [("g", DataType("text")), ("v", DataType("integer"))], [("x", 4), ("y", 6)]
)
equal_totals_b = Table.build(
    [("g", DataType("text")), ("v", DataType("integer"))], [("x", 9), ("y", 1)]
)
print(
    "\nequal totals, unequal groups:"
    f" total says {audit.test_equality_total(equal_totals_a, equal_totals_b, 'v')},"
    f" grouped says {audit.test_equality_grouped(equal_totals_a, equal_totals_b, 'g', 'v').payload['deltas']}"
)

print("\nfull report format (one JSON record per finding):")
print(audit.render_report([d for d in inner.diagnostics + supp.diagnostics]))

"""Divide-and-conquer tidying of cross-year water usage data.

The awkward shape: each row carries a date column for 2015/2016 *and* a
separate amount-in-2013 column, so the year variable lives in rows and
columns at once. A single reshape cannot fix that; splitting the table,
rewriting one part, and extending the parts back together can.
"""

from tabletide import DataType, Session, Table
from tabletide.dsl import parse_expression

rows = []
for si, s in enumerate(("alameda", "burbank", "clovis")):
    for month in ("06", "07", "08"):
        for year in ("2015", "2016"):
            amount = 100.0 + 20 * si + 3 * int(month) + (int(year) % 10)
            rows.append((s, f"{year}-{month}", amount, 90.0 + int(month)))

usage = Table.build(
    [
        ("supplier", DataType("text")),
        ("date", DataType("text")),
        ("amount", DataType("float")),
        ("amount_2013", DataType("float")),
    ],
    rows,
)

session = Session()
session.add_table(usage, "usage")
print(f"input: {usage.row_count} rows x {usage.width} cols: {usage.names}")

# Make the year editable on its own, then run the four-phase recipe:
# facet -> rewrite the copy -> split off the conflicting column -> extend.
session.apply(
    "separate_column",
    {"table": "usage", "column": "date", "splitter": "-", "new_names": ["year", "month"]},
    ["wide"],
)
session.apply(
    "divide_and_conquer",
    {
        "table": "wide",
        "facet": parse_expression('year == "2015"'),
        "edits": {
            "year": parse_expression('"2013"'),
            "amount": parse_expression("amount_2013"),
        },
        "key": "supplier",
    },
    ["tidy4"],
)
session.apply(
    "combine_columns",
    {"table": "tidy4", "columns": ["year", "month"], "combiner": "-", "new_name": "date"},
    ["tidy"],
)

tidy = session.table("tidy")
print(f"tidy:  {tidy.row_count} rows x {tidy.width} cols: {tidy.names}")
years = sorted({d.split("-")[0] for d in tidy.column("date").cells})
print(f"years now in rows: {years}")
print("\nfirst few tidy rows:")
for row in list(tidy.rows())[:6]:
    print("  ", row)

print("\nthe provenance graph shows the fan-out and fan-in:")
print(session.graph.export_dot())

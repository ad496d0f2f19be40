"""A tour of the wrangling algebra, one operation class at a time.

Tables are immutable values: every operation returns a new table and the
inputs stay intact, which is what makes multi-table flows auditable.
"""

from tabletide import DataType, Table
from tabletide import algebra
from tabletide.algebra import Aggregator, BinSpec, SchemaPolicy
from tabletide.dsl import parse_expression


def show(title, table):
    print(f"\n== {title} ({table.row_count}x{table.width})")
    print("   " + " | ".join(table.names))
    for row in table.rows():
        print("   " + " | ".join("∅" if c is None else str(c) for c in row))


# -- create ---------------------------------------------------------------

orders = algebra.create_table(
    [
        ("city", DataType("text")),
        ("year", DataType("integer")),
        ("amount", DataType("float")),
    ],
    [
        ("Oakland", 2015, 12.5),
        ("Oakland", 2016, 14.0),
        ("Fresno", 2015, 7.25),
        ("Fresno", 2016, 6.0),
    ],
)
show("created", orders)

# A dataset identifier: the same constant on every row, handy before a union.
tagged = algebra.create_column(orders, "source", DataType("text"), "portal")
show("with a constant column", tagged)

# -- transform ------------------------------------------------------------

by_amount = algebra.rearrange(orders, sort_keys=[("amount", "desc")])
show("sorted by amount", by_amount)

scaled = algebra.transform_column(orders, "amount", parse_expression("amount * 1000"))
show("amounts in whole units", scaled.table)

# -- separate -------------------------------------------------------------

recent, older = algebra.subset(orders, parse_expression("year == 2016"))
show("2016 rows", recent)
show("everything else", older)

for label, part in algebra.decompose(orders, "city"):
    show(f"decomposed: {label}", part)

low, high = algebra.decompose(orders, "amount", BinSpec(2, 0.0, 20.0))
print(f"\nbins: {low[0]} has {low[1].row_count} rows; {high[0]} has {high[1].row_count}")

# -- combine --------------------------------------------------------------

both = algebra.extend([recent, older], SchemaPolicy("strict"))
show("extended back together", both.table)

totals = algebra.summarize(
    orders, ["city"], [(Aggregator("sum", "amount"), "total"), (Aggregator("count"), "n")]
)
show("totals per city", totals)

# Fold a cross-tabulated table into tidy rows and back.
wide = algebra.create_table(
    [("city", DataType("text")), ("y2015", DataType("float")), ("y2016", DataType("float"))],
    [("Oakland", 12.5, 14.0), ("Fresno", 7.25, 6.0)],
)
show("cross-tabulated", wide)
tidy = algebra.reshape_fold(wide, ["y2015", "y2016"], "year", "amount")
show("folded to tidy", tidy)
back = algebra.reshape_unfold(tidy, "year", "amount")
show("unfolded again", back)

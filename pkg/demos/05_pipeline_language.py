"""The .wr pipeline language: parse, static-check, execute, replay.

A pipeline file is the durable record of a wrangling run: the same
source and inputs always produce the same exported bytes.
"""

import tempfile
from pathlib import Path

from tabletide import dsl
from tabletide.engine import Session

workdir = Path(tempfile.mkdtemp(prefix="tabletide_demo_"))
(workdir / "cities.csv").write_text(
    "city,region,pop\nOakland,west,440000\nFresno,west,540000\n"
    "Buffalo,east,278000\nAlbany,east,99000\n"
)

source = """\
# regional population rollup
load "cities.csv" as cities
(big, small) = subset cities where pop > 300000
rollup = group_aggregate cities by region agg sum(pop) as pop, count as cities
audit key cities on [city]
export rollup to "rollup.csv"
export big to "big.csv"
"""

pipeline = dsl.parse(source)
print("canonical form:")
print(pipeline.render())

issues = dsl.check(pipeline)
print("static check:", issues if issues else "clean, except:")
for issue in issues:
    print(f"  {issue.severity}: line {issue.line}: {issue.message}")

session = Session()
report = dsl.execute(pipeline, session, base_dir=str(workdir))
print("\nexecution:")
for outcome in report.outcomes:
    print(f"  [{outcome.status}] {outcome.text}" + (f"  -> {outcome.detail}" if outcome.detail else ""))

print("\nrollup.csv:")
print((workdir / "rollup.csv").read_text())

# Replay: identical bytes, every time.
first = (workdir / "rollup.csv").read_bytes()
dsl.execute(pipeline, Session(), base_dir=str(workdir))
assert (workdir / "rollup.csv").read_bytes() == first
print("replay produced identical bytes")
print(f"\n(artifacts in {workdir})")

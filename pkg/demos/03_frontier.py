# %%
"""
Cost-effectiveness frontier across the scenario grid
====================================================

All 270 scenarios (9 strategies, 6 frequencies, 5 age groups) are placed on
the cost-QALY plane; dominated and extendedly dominated points drop out.
"""

from collections import Counter

from drscreen import EXAMPLE_CONFIG, load_config
from drscreen.cea import ON_FRONTIER
from drscreen.grid import RunManifest, run_grid

cfg = load_config(EXAMPLE_CONFIG)
grid = run_grid(cfg.inputs, RunManifest([str(EXAMPLE_CONFIG)]))
print(len(grid.rows), "scenarios")

# %%
# Within the annual 20-79 cell.

for p in grid.frontiers["every 1y|20-79"]:
    ratio = "" if p.icer_vs_previous is None else f"{p.icer_vs_previous:,.0f}"
    print(f"{p.id:32s} {p.cost / 1e6:10.2f}M {p.qalys:12,.0f}  {p.status:22s} {ratio}")

# %%
# Pooled over every scenario: the frontier and how the rest were removed.

pooled = grid.frontiers["pooled"]
print(Counter(p.status for p in pooled))
for p in pooled:
    if p.status == ON_FRONTIER:
        print(f"  {p.id}")

# %%
"""
Probabilistic sensitivity analysis and acceptability curves
===========================================================

Parameters are redrawn from their distributions; every strategy sees the same
draw. The acceptability curve counts how often each strategy has the highest
net monetary benefit at a given willingness to pay.
"""

import numpy as np

from drscreen import EXAMPLE_CONFIG, load_config
from drscreen.sensitivity import ceac, run_psa

cfg = load_config(EXAMPLE_CONFIG)
inputs = cfg.inputs
names = list(inputs.strategies)
N_DRAWS = 500  # the command line default is 10,000

for spec in inputs.distributions:
    print(f"{spec.path:32s} {spec.family:8s} {spec.hyper}")

# %%

psa = run_psa(inputs, inputs.distributions, N_DRAWS, master_seed=cfg.psa_seed, names=names)
for row in psa.summary("manual"):
    print(f"{row['strategy']:24s} dCost {row['delta_cost_mean'] / 1e6:7.2f}M  "
          f"dQALY {row['delta_qalys_mean']:8.1f}")

# %%
# Acceptability at 1x and 3x GDP per capita, then across a WTP grid.

g = inputs.wtp.gdp_per_capita
for w, probs in zip((g, 3 * g), ceac(psa, [g, 3 * g])):
    best = int(np.argmax(probs))
    print(f"WTP {w:8,.0f}: {names[best]} wins {probs[best]:.1%} of draws")

grid = np.linspace(0, 5 * g, 11)
table = ceac(psa, grid)
print("\n" + " " * 10 + "".join(f"{n[:10]:>11s}" for n in names))
for w, probs in zip(grid, table):
    print(f"{w:9,.0f} " + "".join(f"{p:11.3f}" for p in probs))

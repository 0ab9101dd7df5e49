# %%
"""
Cohort simulation and the incremental table
===========================================

Every strategy runs through the same Markov cohort for annual screening of
the 20-79 age group. The manual pathway is the status quo; the others are
reported as increments against it.
"""

from drscreen import EXAMPLE_CONFIG, load_config
from drscreen.cea import cea_record
from drscreen.markov import HealthState, simulate
from drscreen.model import evaluate_cell

cfg = load_config(EXAMPLE_CONFIG)
inputs = cfg.inputs
names = list(inputs.strategies)

# %%
# Raw traces: state occupancy per cycle for the status quo.

perfs = inputs.performances()
trace = simulate([perfs["manual"]], 1, 20, inputs.params, inputs.cohort_size)[0]
for t in (0, 10, 30, trace.n_cycles):
    row = ", ".join(f"{s.name}={trace.occupancy[t, s]:,.0f}" for s in HealthState)
    print(f"year {t:2d}: {row}")

# %%
# Aggregated, discounted totals and the comparison with the status quo.

res = evaluate_cell(inputs, names, 1, 20)
base = res["manual"]
print(f"\nstatus quo: cost {base.total_cost / 1e6:,.2f}M, QALYs {base.qalys:,.0f}, "
      f"blindness cases {base.blindness_cases:,.0f}")
print(f"\n{'strategy':24s} {'dCost(M)':>9s} {'dQALY':>8s} {'dBFY':>8s} {'ICER':>10s}  class")
for n in names[1:]:
    r = res[n]
    rec = cea_record(n, "manual", r.total_cost - base.total_cost, r.qalys - base.qalys,
                     r.blindness_free_years - base.blindness_free_years, inputs.wtp)
    icer = rec.icer if isinstance(rec.icer, str) else f"{rec.icer:,.0f}"
    print(f"{n:24s} {rec.delta_cost / 1e6:9.2f} {rec.delta_qalys:8.1f} "
          f"{rec.delta_blindness_free_years:8.1f} {icer:>10s}  {rec.ce_class.value}")

# %%
# The provider view leaves blindness care out.

prov = evaluate_cell(inputs, ["manual", "copilot"], 1, 20, perspective="provider")
dc = prov["copilot"].total_cost - prov["manual"].total_cost
dq = prov["copilot"].qalys - prov["manual"].qalys
print(f"\nprovider perspective, copilot: {dc / dq:,.0f} per QALY")

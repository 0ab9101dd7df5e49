# %%
"""
Time horizon
============

Screening costs arrive early and blindness averted arrives late, so the
copilot ratio falls as the horizon lengthens.
"""

from drscreen import EXAMPLE_CONFIG, load_config
from drscreen.cea import CeClass
from drscreen.sensitivity import horizon_sweep

cfg = load_config(EXAMPLE_CONFIG)
sweep = horizon_sweep(cfg.inputs, range(5, 31))

for h in sweep.horizons:
    rec = sweep.record(h, "copilot")
    icer = rec.icer.value if hasattr(rec.icer, "value") else f"{rec.icer:,.0f}"
    print(f"{h:2d} years: dQALY {rec.delta_qalys:7.1f}  ICER {icer:>10s}  {rec.ce_class.value}")

# %%

print("cost-effective from", sweep.crossing("copilot", (CeClass.COST_EFFECTIVE, CeClass.VERY_COST_EFFECTIVE)),
      "years; very cost-effective from", sweep.crossing("copilot", (CeClass.VERY_COST_EFFECTIVE,)), "years")

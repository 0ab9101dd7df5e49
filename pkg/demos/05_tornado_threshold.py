# %%
"""
One-way sensitivity and threshold finding
=========================================

Each parameter moves alone to the ends of its range while the copilot
comparison with manual screening is recomputed. A threshold scan then looks
for the value at which the best strategy changes.
"""

import math

from drscreen import EXAMPLE_CONFIG, load_config
from drscreen.sensitivity import relative_ranges, threshold_scan, tornado

cfg = load_config(EXAMPLE_CONFIG)
inputs = cfg.inputs

ranges = relative_ranges(inputs, cfg.tornado_paths, cfg.tornado_spread)
ranges.update(inputs.tornado_ranges)
bars = tornado(inputs, "manual", "copilot", ranges)


def show(v):
    return v.value if hasattr(v, "value") else f"{v:,.0f}"


# %%
# Widest bars first. A bar whose end leaves the north-east quadrant has no
# finite width and is listed after the finite ones.

print(f"base ICER {show(bars[0].base)}")
for b in bars:
    width = "n/a" if math.isnan(b.width) else f"{b.width:,.0f}"
    print(f"{b.path:32s} [{b.low:9.4g}, {b.high:9.4g}] -> {show(b.value_low):>10s} .. "
          f"{show(b.value_high):>10s}  width {width}{'  ' + b.error if b.error else ''}")

# %%
# When does the secondary grader become good enough to change the optimum?

for sp in threshold_scan(inputs, "graders.M2.sensitivity", 0.90, 1.0):
    print(f"M2 sensitivity {sp.value:.4f}: {sp.before} -> {sp.after}")

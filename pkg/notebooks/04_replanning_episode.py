"""
Sampling-based planning with event-triggered replanning
=======================================================

Run the bundled two-source scenario and look at when the plan was dropped.
"""

import numpy as np

from riskplan import load_scenario, run

sc = load_scenario("fig2")
trace = run(sc, deterministic=True)
print(f"{sc.id}: {trace.status}, {len(trace.steps) - 1} steps, path length {trace.path_length:.1f}")

for s in trace.steps:
    if s.trigger:
        print(f"  step {s.index:3d} at {np.round(s.state, 2)}: replanned")

alpha = sc.constraint.alpha
print(f"steps above alpha={alpha:g}: {np.mean(trace.hazards > alpha):.1%}; peak hazard met {trace.hazards.max():.1f}")

"""
Plot-ready grids
================

Write truth, posterior and cost grids as CSV after an episode, the same
files the command line produces.
"""

import tempfile
from pathlib import Path

from riskplan import load_scenario, run
from riskplan.runner import FIELDS, export_field, write_grid_csv

sc = load_scenario("fig2")
out = Path(tempfile.mkdtemp(prefix="riskplan-"))
trace = run(sc, deterministic=True, out_dir=out)
dataset = (trace.dataset_points, trace.dataset_values)

for what in FIELDS:
    xs, ys, V = export_field(sc, what, 0.25, dataset)
    path = write_grid_csv(out / f"{what}.csv", xs, ys, V)
    print(f"{path.name:20s} {V.shape}  range [{V.min():.2f}, {V.max():.3g}]")
print("written to", out)

"""Run scenarios end to end and export plot-ready grids."""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

import numpy as np

from .gp import GpModel
from .graph_planner import run_episode
from .risk import cvar
from .scenario import Scenario
from .smooth_planner import run_episode_igp
from .trace import EpisodeTrace

FIELDS = ("truth", "posterior-mean", "posterior-cvar", "cost")


def run(scenario: Scenario, seed=None, deterministic=None, out_dir=None) -> EpisodeTrace:
    """Run one episode; write trace.jsonl, timings.json and scenario.yaml if out_dir is given."""
    if seed is not None or deterministic is not None:
        scenario = Scenario.from_dict(scenario.to_dict())
        if seed is not None:
            scenario.seed = int(seed)
        if deterministic is not None:
            scenario.graph = dataclasses.replace(scenario.graph, deterministic=bool(deterministic))
    world = scenario.world_obj()
    rng = np.random.default_rng(scenario.seed)
    if scenario.planner == "graph":
        trace = run_episode(world, scenario.start, scenario.goal, scenario.constraint,
                            scenario.graph, scenario.kernel, rng)
    else:
        trace = run_episode_igp(world, scenario.start, scenario.goal.center, scenario.constraint,
                                scenario.weights, scenario.kernel, rng, scenario.smooth)
    trace.meta.update(scenario=scenario.id, seed=scenario.seed)
    out_dir = out_dir if out_dir is not None else scenario.output
    if out_dir is not None:
        trace.write(out_dir)
        (Path(out_dir) / "scenario.yaml").write_text(scenario.dumps())
    return trace


def export_field(scenario: Scenario, what: str, resolution: float = 0.25, dataset=None):
    """Evaluate a field on the world grid.

    ``dataset`` is a (points, values) pair, typically the final dataset of a
    trace; without it posterior fields use the prior. Returns (xs, ys, V)
    with ``V[iy, ix]``.
    """
    if what not in FIELDS:
        raise ValueError(f"unknown field {what!r}; expected one of {', '.join(FIELDS)}")
    world = scenario.world_obj()
    if what == "truth":
        return world.field_grid(world.hazard, resolution)
    pts, vals = dataset if dataset is not None else (None, None)
    model = GpModel(scenario.kernel, world.sensor_noise, world.bounds, pts, vals)
    metric = scenario.constraint.metric
    fn = {
        "posterior-mean": lambda P: model.posterior(P).mean,
        "posterior-cvar": lambda P: cvar(model.posterior(P), metric.beta, metric.tail),
        "cost": lambda P: scenario.constraint.cost(model, P),
    }[what]
    return world.field_grid(fn, resolution)


def write_grid_csv(path, xs, ys, values):
    """CSV grid: header row holds x coordinates, first column holds y."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y\\x"] + [repr(float(x)) for x in xs])
        for y, row in zip(ys, values):
            w.writerow([repr(float(y))] + [repr(float(v)) for v in row])
    return path


def read_grid_csv(path):
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    xs = np.array([float(v) for v in rows[0][1:]])
    ys = np.array([float(r[0]) for r in rows[1:]])
    V = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return xs, ys, V

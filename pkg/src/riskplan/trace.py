"""Episode traces and their line-delimited JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["StepRecord", "PlanRecord", "EpisodeTrace", "read_trace"]


def _floats(a):
    return [float(v) for v in np.ravel(a)]


@dataclass
class StepRecord:
    index: int
    state: list
    observation: float
    hazard: float
    plan_id: int | None
    trigger: bool = False
    optimizer: dict | None = None

    def to_dict(self):
        d = {
            "kind": "step",
            "step": self.index,
            "state": _floats(self.state),
            "observation": float(self.observation),
            "hazard": float(self.hazard),
            "plan_id": self.plan_id,
            "trigger": bool(self.trigger),
        }
        if self.optimizer is not None:
            d["optimizer"] = self.optimizer
        return d


@dataclass
class PlanRecord:
    id: int
    step: int
    waypoints: np.ndarray
    cost: float
    stats: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": "plan",
            "plan_id": self.id,
            "step": self.step,
            "cost": float(self.cost),
            "waypoints": [_floats(w) for w in self.waypoints],
            "stats": self.stats,
        }


@dataclass
class EpisodeTrace:
    """Everything an episode produced, in step order.

    ``status`` is one of "goal", "timeout" or "failure". Wall-clock timings
    live in ``timings`` and are kept out of the serialized trace so that
    deterministic runs produce identical bytes.
    """

    steps: list = field(default_factory=list)
    plans: list = field(default_factory=list)
    status: str = "running"
    dataset_points: np.ndarray | None = None
    dataset_values: np.ndarray | None = None
    timings: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def reached_goal(self) -> bool:
        return self.status == "goal"

    @property
    def states(self) -> np.ndarray:
        return np.array([s.state for s in self.steps], dtype=float)

    @property
    def hazards(self) -> np.ndarray:
        return np.array([s.hazard for s in self.steps], dtype=float)

    @property
    def observations(self) -> np.ndarray:
        return np.array([s.observation for s in self.steps], dtype=float)

    @property
    def trigger_count(self) -> int:
        return sum(1 for s in self.steps if s.trigger)

    @property
    def path_length(self) -> float:
        st = self.states
        if len(st) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(st[:, :2], axis=0), axis=1)))

    def records(self):
        plans = {p.step: [] for p in self.plans}
        for p in self.plans:
            plans[p.step].append(p)
        for s in self.steps:
            yield s.to_dict()
            for p in plans.get(s.index, ()):
                yield p.to_dict()
        yield {
            "kind": "summary",
            "status": self.status,
            "steps": len(self.steps),
            "triggers": self.trigger_count,
            "meta": self.meta,
            "dataset": {
                "points": [_floats(p) for p in (self.dataset_points if self.dataset_points is not None else [])],
                "values": _floats(self.dataset_values if self.dataset_values is not None else []),
            },
        }

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "trace.jsonl"
        path.write_text(self.dumps())
        (out / "timings.json").write_text(json.dumps(self.timings, indent=2, sort_keys=True) + "\n")
        return path


def read_trace(path) -> EpisodeTrace:
    trace = EpisodeTrace()
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        r = json.loads(line)
        if r["kind"] == "step":
            trace.steps.append(
                StepRecord(
                    index=r["step"],
                    state=r["state"],
                    observation=r["observation"],
                    hazard=r["hazard"],
                    plan_id=r["plan_id"],
                    trigger=r["trigger"],
                    optimizer=r.get("optimizer"),
                )
            )
        elif r["kind"] == "plan":
            trace.plans.append(
                PlanRecord(r["plan_id"], r["step"], np.array(r["waypoints"]), r["cost"], r.get("stats", {}))
            )
        elif r["kind"] == "summary":
            trace.status = r["status"]
            trace.meta = r.get("meta", {})
            pts = r["dataset"]["points"]
            trace.dataset_points = np.array(pts, dtype=float).reshape(len(pts), -1)
            trace.dataset_values = np.array(r["dataset"]["values"], dtype=float)
    return trace

"""Scenario files: YAML in, validated objects out, and back again."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .cost import RiskConstraint
from .gp import SquaredExponential
from .graph_planner import GoalBox, GoalDisc, GraphConfig, goal_from_dict
from .risk import RiskMetric
from .smooth_planner import FactorWeights, SmoothConfig
from .world import HazardSource, World, obstacle_from_dict

__all__ = ["ConfigError", "Scenario", "load_scenario", "bundled_scenarios"]


class ConfigError(ValueError):
    """Malformed scenario; the message names the offending field or line."""


_TOP = {"id", "description", "seed", "start", "goal", "world", "constraint", "kernel", "planner", "output"}
_WORLD = {"bounds", "obstacles", "sources", "sigma_n2", "sdf_resolution", "squared_exponent"}
_CONSTRAINT = {"alpha", "gamma", "metric"}
_KERNEL = {"type", "signal_variance", "lengthscales"}
_GRAPH = {f.name for f in fields(GraphConfig)}
_SMOOTH = {f.name for f in fields(SmoothConfig)}
_WEIGHTS = {f.name for f in fields(FactorWeights)}


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where or 'scenario'}: expected a mapping, got {type(d).__name__}")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")


def _field(where, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def _vec(v, n=2):
    a = [float(x) for x in v]
    if len(a) != n:
        raise ValueError(f"expected {n} numbers, got {len(a)}")
    return tuple(a)


@dataclass
class Scenario:
    """A complete, runnable episode description."""

    id: str
    start: tuple
    goal: GoalDisc | GoalBox
    world: dict
    constraint: RiskConstraint
    kernel: SquaredExponential = field(default_factory=SquaredExponential)
    planner: str = "graph"
    graph: GraphConfig = field(default_factory=GraphConfig)
    smooth: SmoothConfig = field(default_factory=SmoothConfig)
    weights: FactorWeights = field(default_factory=FactorWeights)
    seed: int = 0
    description: str = ""
    output: str | None = None

    def build_world(self) -> World:
        w = self.world
        return World(
            bounds=w["bounds"],
            obstacles=[obstacle_from_dict(o) for o in w["obstacles"]],
            sources=[HazardSource(s["center"], s["k"], s["tau"], s["decay"]) for s in w["sources"]],
            sensor_noise=w["sigma_n2"],
            sdf_resolution=w["sdf_resolution"],
            squared_exponent=w["squared_exponent"],
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        planner = {"kind": self.planner}
        if self.planner == "graph":
            planner.update(asdict(self.graph))
        else:
            planner.update(asdict(self.smooth))
            planner["weights"] = asdict(self.weights)
        return {
            "id": self.id,
            "description": self.description,
            "seed": self.seed,
            "start": list(self.start),
            "goal": self.goal.to_dict(),
            "world": copy.deepcopy(self.world),
            "constraint": {
                "alpha": self.constraint.alpha,
                "gamma": self.constraint.gamma,
                "metric": self.constraint.metric.to_dict(),
            },
            "kernel": {
                "type": self.kernel.name,
                "signal_variance": self.kernel.signal_variance,
                "lengthscales": list(self.kernel.lengthscales),
            },
            "planner": planner,
            "output": self.output,
        }

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        _check_keys(d, _TOP, "")
        for key in ("id", "start", "goal", "world", "constraint"):
            if key not in d:
                raise ConfigError(f"missing required field '{key}'")

        w = d["world"]
        _check_keys(w, _WORLD, "world")
        world = _field("world", lambda: {
            "bounds": [list(_vec(w.get("bounds", [[0, 0], [20, 20]])[0])), list(_vec(w.get("bounds", [[0, 0], [20, 20]])[1]))],
            "obstacles": [obstacle_from_dict(o).to_dict() for o in w.get("obstacles") or []],
            "sources": [
                HazardSource(_vec(s["center"]), float(s.get("k", 100.0)), float(s.get("tau", 0.0)),
                             _vec(s.get("decay", (1.1, 0.9)))).to_dict()
                for s in w.get("sources") or []
            ],
            "sigma_n2": float(w.get("sigma_n2", 0.5)),
            "sdf_resolution": float(w.get("sdf_resolution", 0.1)),
            "squared_exponent": bool(w.get("squared_exponent", True)),
        })

        c = d["constraint"]
        _check_keys(c, _CONSTRAINT, "constraint")
        metric = _field("constraint.metric", lambda: RiskMetric.from_dict(c.get("metric", {})))
        _check_keys(c.get("metric", {}), {"type", "beta", "tail"}, "constraint.metric")
        constraint = _field("constraint", lambda: RiskConstraint(metric, float(c["alpha"]), float(c.get("gamma", 0.1))))

        k = d.get("kernel", {})
        _check_keys(k, _KERNEL, "kernel")
        if k.get("type", "squared-exponential") != "squared-exponential":
            raise ConfigError(f"kernel.type: unsupported kernel {k['type']!r}")
        kernel = _field("kernel", lambda: SquaredExponential(float(k.get("signal_variance", 50.0)),
                                                             tuple(k.get("lengthscales", (2.0, 2.0)))))

        p = dict(d.get("planner", {}))
        kind = p.pop("kind", "graph")
        graph, smooth, weights = GraphConfig(), SmoothConfig(), FactorWeights()
        if kind == "graph":
            _check_keys(p, _GRAPH, "planner")
            graph = _field("planner", lambda: GraphConfig(**p))
        elif kind == "smooth":
            wts = p.pop("weights", {})
            _check_keys(p, _SMOOTH, "planner")
            _check_keys(wts, _WEIGHTS, "planner.weights")
            smooth = _field("planner", lambda: SmoothConfig(**p))
            weights = _field("planner.weights", lambda: FactorWeights(**wts))
        else:
            raise ConfigError(f"planner.kind: expected 'graph' or 'smooth', got {kind!r}")

        sc = cls(
            id=str(d["id"]),
            start=_field("start", lambda: _vec(d["start"])),
            goal=_field("goal", lambda: goal_from_dict(d["goal"])),
            world=world,
            constraint=constraint,
            kernel=kernel,
            planner=kind,
            graph=graph,
            smooth=smooth,
            weights=weights,
            seed=_field("seed", lambda: int(d.get("seed", 0))),
            description=str(d.get("description", "")),
            output=d.get("output"),
        )
        if sc.seed < 0:
            raise ConfigError("seed: must be a non-negative integer")
        world_obj = _field("world", sc.build_world)
        if not world_obj.is_free(np.array(sc.start))[0]:
            raise ConfigError("start: not in free space")
        if not world_obj.is_free(np.array(sc.goal.center))[0]:
            raise ConfigError("goal: centre not in free space")
        sc._world_cache = world_obj
        return sc

    @classmethod
    def loads(cls, text: str, source: str = "<string>") -> "Scenario":
        try:
            d = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
            raise ConfigError(f"{source}: YAML parse error at {where}: {getattr(e, 'problem', e)}") from None
        try:
            return cls.from_dict(d)
        except ConfigError as e:
            raise ConfigError(f"{source}: {e}") from None

    def world_obj(self) -> World:
        cached = getattr(self, "_world_cache", None)
        if cached is None:
            cached = self._world_cache = self.build_world()
        return cached

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.to_dict() == other.to_dict()


def bundled_scenarios() -> dict:
    """Scenario names shipped with the package, mapped to their file paths."""
    root = resources.files("riskplan") / "scenarios"
    return {Path(p.name).stem: p for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".yaml")}


def load_scenario(name_or_path) -> Scenario:
    """Load a bundled scenario by name or any YAML file by path."""
    bundled = bundled_scenarios()
    if str(name_or_path) in bundled:
        p = bundled[str(name_or_path)]
        return Scenario.loads(p.read_text(), str(name_or_path))
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"no such scenario file or bundled scenario: {name_or_path}")
    return Scenario.loads(path.read_text(), str(path))

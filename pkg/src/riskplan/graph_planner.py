"""Risk-aware anytime graph planner with event-triggered replanning.

The planner follows the batch-informed-trees recipe: states are sampled in
batches from the informed set of the current solution, connected through a
random geometric graph, and expanded best-first from an edge queue ordered
by an admissible estimate. True edge costs, which need many GP posterior
queries, are only computed for edges that can still improve the incumbent.

The episode loop alternates plan / move / observe and drops the whole
search whenever freshly observed data raises the risk on the committed path
above its planning-time extreme-tail value.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cost import RiskConstraint
from .gp import GpModel
from .trace import EpisodeTrace, PlanRecord, StepRecord
from .world import World

__all__ = [
    "Trajectory",
    "GoalDisc",
    "GoalBox",
    "goal_from_dict",
    "GraphConfig",
    "PlanResult",
    "GraphPlanner",
    "edge_cost",
    "path_cost",
    "heuristic",
    "check_trigger",
    "run_episode",
]

log = logging.getLogger(__name__)


class Trajectory:
    """Polyline through ``waypoints`` with an arc-length parametrization on [0, 1]."""

    def __init__(self, waypoints):
        w = np.array(waypoints, dtype=float)
        if w.ndim != 2 or len(w) < 1:
            raise ValueError("waypoints must be an (n, d) array")
        if len(w) == 1:
            w = np.vstack([w, w])
        self.waypoints = w

    def __len__(self):
        return len(self.waypoints)

    @property
    def start(self):
        return self.waypoints[0]

    @property
    def end(self):
        return self.waypoints[-1]

    @property
    def arclength(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.waypoints[:, :2], axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def __call__(self, t):
        """Position at normalized arc length ``t`` (scalar or array)."""
        s = self.arclength
        t = np.asarray(t, dtype=float)
        if s[-1] == 0.0:
            return np.broadcast_to(self.waypoints[0], t.shape + self.waypoints.shape[1:]).copy()
        target = np.clip(t, 0.0, 1.0) * s[-1]
        return np.stack(
            [np.interp(target, s, self.waypoints[:, k]) for k in range(self.waypoints.shape[1])], axis=-1
        )

    def resampled(self, n: int) -> "Trajectory":
        return Trajectory(self(np.linspace(0.0, 1.0, n)))

    def respaced(self, step: float) -> "Trajectory":
        """Waypoints every ``step`` of arc length, plus the end point."""
        L = self.length
        if L == 0.0:
            return Trajectory([self.start, self.start])
        n = int(math.ceil(L / step - 1e-9))
        s = np.minimum(np.arange(n + 1) * step, L)
        return Trajectory(self(s / L))


# -- goal regions -----------------------------------------------------------


@dataclass(frozen=True)
class GoalDisc:
    center: tuple[float, float]
    radius: float

    def contains(self, p) -> np.ndarray:
        return self.distance(p) <= 0.0

    def distance(self, p):
        p = np.asarray(p, dtype=float)
        d = np.maximum(np.linalg.norm(np.atleast_2d(p) - np.asarray(self.center), axis=1) - self.radius, 0.0)
        return float(d[0]) if p.ndim == 1 else d

    def nearest(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        c = np.asarray(self.center)
        v = p - c
        n = np.linalg.norm(v)
        if n <= self.radius:
            return p.copy()
        return c + v * (self.radius / n)

    def sample(self, rng, n) -> np.ndarray:
        r = self.radius * np.sqrt(rng.random(n))
        a = 2 * np.pi * rng.random(n)
        return np.asarray(self.center) + np.stack([r * np.cos(a), r * np.sin(a)], 1)

    def to_dict(self):
        return {"type": "circle", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class GoalBox:
    lo: tuple[float, float]
    hi: tuple[float, float]

    @property
    def center(self):
        return tuple((np.asarray(self.lo) + np.asarray(self.hi)) / 2)

    def contains(self, p) -> np.ndarray:
        return self.distance(p) <= 0.0

    def distance(self, p):
        p = np.asarray(p, dtype=float)
        P = np.atleast_2d(p)
        d = np.linalg.norm(P - np.clip(P, self.lo, self.hi), axis=1)
        return float(d[0]) if p.ndim == 1 else d

    def nearest(self, p):
        return np.clip(np.asarray(p, dtype=float), self.lo, self.hi)

    def sample(self, rng, n) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return lo + rng.random((n, 2)) * (hi - lo)

    def to_dict(self):
        return {"type": "rect", "lo": list(self.lo), "hi": list(self.hi)}


def goal_from_dict(d):
    if d.get("type", "circle") == "circle":
        return GoalDisc(tuple(map(float, d["center"])), float(d.get("radius", 1.0)))
    if d["type"] == "rect":
        return GoalBox(tuple(map(float, d["lo"])), tuple(map(float, d["hi"])))
    raise ValueError(f"unknown goal type {d['type']!r}")


def heuristic(a, goal) -> float:
    """Euclidean distance to the goal region; admissible because cost >= 1."""
    return goal.distance(a)


# -- costs ------------------------------------------------------------------


def edge_cost(constraint: RiskConstraint, model: GpModel, a, b, step: float = 0.1) -> float:
    """Trapezoidal line integral of the risk cost along the segment a -> b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    L = float(np.linalg.norm(b - a))
    if L == 0.0:
        return 0.0
    n = max(int(math.ceil(L / step)), 1)
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    f = np.asarray(constraint.cost(model, a + t * (b - a)))
    ds = L / n
    return float(ds * (0.5 * f[0] + f[1:-1].sum() + 0.5 * f[-1]))


def path_cost(constraint, model, waypoints, step: float = 0.1) -> float:
    w = np.asarray(waypoints)
    return sum(edge_cost(constraint, model, w[i], w[i + 1], step) for i in range(len(w) - 1))


# -- planner ----------------------------------------------------------------


@dataclass
class GraphConfig:
    """Tuning of the graph planner and its episode loop.

    ``batches`` is the deterministic budget (sample batches per plan call);
    ``time_budget`` (seconds) replaces it when ``deterministic`` is False.
    """

    batch_size: int = 100
    batches: int = 4
    time_budget: float = 3.0
    deterministic: bool = True
    rgg_constant: float = 1.5
    goal_fraction: float = 0.05
    edge_step: float = 0.1
    step: float = 0.25
    beta_prime: float = 0.01
    stride: int = 1
    max_steps: int | None = None
    max_plan_retries: int = 3

    def __post_init__(self):
        if self.batch_size < 1 or self.batches < 1:
            raise ValueError("batch_size and batches must be >= 1")
        if not self.time_budget > 0:
            raise ValueError("time_budget must be > 0")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not 0.0 < self.beta_prime < 1.0:
            raise ValueError("beta_prime must lie in (0, 1)")
        if not (self.step > 0 and self.edge_step > 0):
            raise ValueError("step lengths must be > 0")


@dataclass
class PlanResult:
    trajectory: Trajectory | None
    cost: float
    history: list = field(default_factory=list)  # (edges evaluated, incumbent cost)
    stats: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.trajectory is not None


class GraphPlanner:
    """Batch-informed anytime search under the risk line-integral cost."""

    def __init__(self, world: World, model: GpModel, constraint: RiskConstraint, cfg: GraphConfig, rng):
        self.world = world
        self.model = model
        self.constraint = constraint
        self.cfg = cfg
        self.rng = rng
        self.clear()

    def clear(self):
        """Discard every sample, vertex and cached edge cost."""
        self._pts = np.empty((0, 2))
        self._is_vertex = np.empty(0, dtype=bool)
        self._alive = np.empty(0, dtype=bool)
        self._g = np.empty(0)
        self._parent = {}
        self._children = {}
        self._edge = {}

    def update_model(self, model: GpModel):
        self.model = model

    # -- bookkeeping --------------------------------------------------------

    def _add_points(self, P, vertex=False):
        n0 = len(self._pts)
        self._pts = np.vstack([self._pts, P])
        self._is_vertex = np.append(self._is_vertex, np.full(len(P), vertex))
        self._alive = np.append(self._alive, np.ones(len(P), dtype=bool))
        self._g = np.append(self._g, np.full(len(P), np.inf))
        return list(range(n0, n0 + len(P)))

    def _set_parent(self, x, v, c):
        old = self._parent.get(x)
        if old is not None:
            self._children[old].discard(x)
        self._parent[x] = v
        self._edge[x] = c
        self._children.setdefault(v, set()).add(x)
        delta = self._g[v] + c - self._g[x]
        self._g[x] = self._g[v] + c
        if np.isfinite(delta):
            stack = list(self._children.get(x, ()))
            while stack:
                y = stack.pop()
                self._g[y] += delta
                stack.extend(self._children.get(y, ()))

    def _radius(self, q):
        area = float(np.prod(self.world.bounds[1] - self.world.bounds[0]))
        q = max(q, 2)
        return self.cfg.rgg_constant * math.sqrt(area * math.log(q) / q)

    def _informed(self, P, start, goal, c_best):
        f_hat = np.linalg.norm(P - start, axis=1) + goal.distance(P)
        return f_hat < c_best

    def _sample(self, n, start, goal, c_best):
        lo, hi = self.world.bounds
        out = []
        need = n
        for _ in range(50):
            if need <= 0:
                break
            P = lo + self.rng.random((max(4 * need, 64), 2)) * (hi - lo)
            ok = self.world.is_free(P)
            if np.isfinite(c_best):
                ok &= self._informed(P, start, goal, c_best)
            P = P[ok][:need]
            out.append(P)
            need -= len(P)
        return np.vstack(out) if out else np.empty((0, 2))

    def _goal_samples(self, n, goal):
        P = goal.sample(self.rng, 4 * n)
        P = P[self.world.is_free(P)]
        return P[:n]

    # -- main loop ----------------------------------------------------------

    def plan(self, start, goal) -> PlanResult:
        cfg = self.cfg
        start = np.asarray(start, dtype=float)
        t0 = time.perf_counter()
        if goal.contains(start):
            return PlanResult(Trajectory([start, start]), 0.0, [(0, 0.0)], {"batches": 0, "edges": 0})
        self.clear()
        s_idx = self._add_points(start[None], vertex=True)[0]
        self._g[s_idx] = 0.0
        seed_goal = goal.nearest(start)
        if self.world.is_free(seed_goal)[0]:
            self._add_points(seed_goal[None])

        c_best = math.inf
        best_goal = None
        history = []
        edges_evaluated = 0
        batch = 0
        out_of_time = False
        dist = lambda i, j: float(np.linalg.norm(self._pts[i] - self._pts[j]))

        while not out_of_time:
            if cfg.deterministic and batch >= cfg.batches:
                break
            if not cfg.deterministic and time.perf_counter() - t0 > cfg.time_budget:
                break
            batch += 1

            # prune samples and vertices that cannot improve the incumbent
            if np.isfinite(c_best):
                hopeless = ~self._informed(self._pts, start, goal, c_best)
                hopeless &= ~self._is_vertex
                self._alive &= ~hopeless

            n_goal = max(1, int(round(cfg.goal_fraction * cfg.batch_size)))
            self._add_points(self._goal_samples(n_goal, goal))
            self._add_points(self._sample(cfg.batch_size - n_goal, start, goal, c_best))

            q = int(np.count_nonzero(self._alive))
            r = self._radius(q)
            h = goal.distance(self._pts)

            vq = []  # (g + h, idx)
            eq = []  # (key, tiebreak, v, x)
            counter = 0
            for v in np.flatnonzero(self._is_vertex & self._alive):
                heapq.heappush(vq, (self._g[v] + h[v], int(v)))
            expanded = set()

            while True:
                if not cfg.deterministic and time.perf_counter() - t0 > cfg.time_budget:
                    out_of_time = True
                    break
                best_e = eq[0][0] if eq else math.inf
                while vq and vq[0][0] <= best_e:
                    _, v = heapq.heappop(vq)
                    if v in expanded or not self._alive[v]:
                        continue
                    expanded.add(v)
                    d = np.linalg.norm(self._pts - self._pts[v], axis=1)
                    near = np.flatnonzero((d <= r) & self._alive)
                    for x in near:
                        if x == v:
                            continue
                        est = self._g[v] + d[x]
                        if est + h[x] >= c_best or est >= self._g[x]:
                            continue
                        if self._is_vertex[x] and self._parent.get(int(x)) == v:
                            continue
                        counter += 1
                        heapq.heappush(eq, (est + h[x], d[x], counter, v, int(x)))
                    best_e = eq[0][0] if eq else math.inf
                if not eq:
                    break
                key, chat, _, v, x = heapq.heappop(eq)
                if key >= c_best:
                    break
                if self._g[v] + chat >= self._g[x]:
                    continue
                if not self.world.collision_free(self._pts[v], self._pts[x]):
                    continue
                c = edge_cost(self.constraint, self.model, self._pts[v], self._pts[x], cfg.edge_step)
                edges_evaluated += 1
                if self._g[v] + c + h[x] >= c_best or self._g[v] + c >= self._g[x]:
                    continue
                was_vertex = self._is_vertex[x]
                self._is_vertex[x] = True
                self._set_parent(x, v, c)
                if not was_vertex:
                    heapq.heappush(vq, (self._g[x] + h[x], x))
                else:
                    expanded.discard(x)
                    heapq.heappush(vq, (self._g[x] + h[x], x))
                goals = np.flatnonzero(self._is_vertex & (h <= 0.0))
                if len(goals):
                    gi = goals[np.argmin(self._g[goals])]
                    if self._g[gi] < c_best:
                        c_best = float(self._g[gi])
                        best_goal = int(gi)
                        history.append((edges_evaluated, c_best))

        stats = {"batches": batch, "edges": edges_evaluated, "vertices": int(self._is_vertex.sum())}
        if best_goal is None:
            return PlanResult(None, math.inf, history, stats)
        # costs may have dropped through rewiring of ancestors
        c_best = float(self._g[best_goal])
        path = [best_goal]
        while path[-1] != s_idx:
            path.append(self._parent[path[-1]])
        return PlanResult(Trajectory(self._pts[path[::-1]]), c_best, history, stats)


# -- replanning trigger -----------------------------------------------------


def check_trigger(waypoints_ahead, model_at_plan: GpModel, model_now: GpModel, constraint: RiskConstraint, beta_prime=0.01, stride: int = 1) -> bool:
    """True if the current risk at some upcoming waypoint exceeds its
    planning-time risk at the more extreme level ``beta_prime``."""
    w = np.asarray(waypoints_ahead, dtype=float).reshape(-1, model_now.kernel.dim)[::stride]
    if len(w) == 0:
        return False
    if not beta_prime < constraint.metric.beta:
        raise ValueError("beta_prime must be smaller than the constraint's beta")
    now = np.atleast_1d(constraint.metric.apply(model_now.posterior(w)))
    then = np.atleast_1d(constraint.metric.with_beta(beta_prime).apply(model_at_plan.posterior(w)))
    return bool(np.any(now > then))


# -- episode ----------------------------------------------------------------


def run_episode(world: World, start, goal, constraint: RiskConstraint, cfg: GraphConfig, kernel, rng) -> EpisodeTrace:
    """Plan, move one waypoint, observe, and replan when the trigger fires."""
    t_start = time.perf_counter()
    start = np.asarray(start, dtype=float)
    trace = EpisodeTrace(meta={"planner": "graph"})
    plan_rng = np.random.default_rng(rng.integers(2**63))
    max_steps = cfg.max_steps or int(math.ceil(10 * world.diameter / cfg.step))

    model = GpModel(kernel, world.sensor_noise, bounds=world.bounds)
    x = start
    z = world.observe(x, rng)
    model.add_observation(x, z)
    trace.steps.append(StepRecord(0, x, z, world.hazard(x), None))

    planner = GraphPlanner(world, model, constraint, cfg, plan_rng)
    plan_time = 0.0
    step = 0
    plan_id = -1
    while not goal.contains(x):
        t0 = time.perf_counter()
        result = planner.plan(x, goal)
        retries = 0
        while not result.success and retries < cfg.max_plan_retries:
            retries += 1
            planner.cfg = GraphConfig(**{**cfg.__dict__, "batches": cfg.batches * 2 ** retries,
                                         "time_budget": cfg.time_budget * 2 ** retries})
            result = planner.plan(x, goal)
        planner.cfg = cfg
        plan_time += time.perf_counter() - t0
        if not result.success:
            trace.status = "failure"
            break
        plan_id += 1
        model_at_plan = model.copy()
        path = result.trajectory.respaced(cfg.step).waypoints
        trace.plans.append(PlanRecord(plan_id, step, result.trajectory.waypoints, result.cost, result.stats))

        idx = 0
        while idx < len(path) - 1 and step < max_steps:
            idx += 1
            step += 1
            x = path[idx]
            z = world.observe(x, rng)
            model.add_observation(x, z)
            rec = StepRecord(step, x, z, world.hazard(x), plan_id)
            trace.steps.append(rec)
            if goal.contains(x):
                break
            if check_trigger(path[idx + 1:], model_at_plan, model, constraint, cfg.beta_prime, cfg.stride):
                rec.trigger = True
                break
        if step >= max_steps and not goal.contains(x):
            trace.status = "timeout"
            break
        # discard the search; the model object is shared and already current
        planner.clear()
        planner.update_model(model)

    if trace.status == "running":
        trace.status = "goal"
    trace.dataset_points = model.points.copy()
    trace.dataset_values = model.values.copy()
    trace.timings = {"total_s": time.perf_counter() - t_start, "planning_s": plan_time}
    return trace

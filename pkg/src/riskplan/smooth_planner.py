"""Risk-aware trajectory optimization over a chain of support states.

The trajectory is a sequence of M states tied together by second-difference
smoothness factors, pushed away from obstacles by a hinge on the signed
distance, and away from risky regions by the residual ``f(x) - 1`` of the
risk cost field. MAP inference on this factor graph is a nonlinear least
squares problem solved with Levenberg-Marquardt. Online replanning re-solves
from the previous solution while traversed states stay frozen.
"""

from __future__ import annotations

import functools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .cost import RiskConstraint
from .gp import GpModel
from .graph_planner import Trajectory
from .trace import EpisodeTrace, PlanRecord, StepRecord
from .world import World

__all__ = [
    "FactorWeights",
    "Factor",
    "FactorGraphProblem",
    "OptimizeResult",
    "NoPathError",
    "obstacle_residual",
    "risk_residual",
    "residuals",
    "total_cost",
    "optimize",
    "initial_trajectory",
    "fix_factors",
    "SmoothConfig",
    "run_episode_igp",
]

log = logging.getLogger(__name__)


class NoPathError(RuntimeError):
    pass


@dataclass(frozen=True)
class FactorWeights:
    sigma_obs: float = 1.0
    sigma_risk: float = 1.0
    smoothness: float = 10.0
    eps_obs: float = 0.5

    def __post_init__(self):
        if not (self.sigma_obs > 0 and self.sigma_risk > 0 and self.smoothness > 0 and self.eps_obs > 0):
            raise ValueError("factor weights must be > 0")


@dataclass(frozen=True)
class Factor:
    kind: str  # prior | smoothness | obstacle | risk
    indices: tuple
    weight: np.ndarray  # information matrix


@dataclass
class FactorGraphProblem:
    """Support states, the factors linking them, and the frozen index set.

    The first and last states carry hard prior factors: they are never moved
    by the optimizer, exactly like frozen states.
    """

    variables: np.ndarray
    weights: FactorWeights = field(default_factory=FactorWeights)
    factors: list = field(default_factory=list)
    frozen: set = field(default_factory=set)

    def __post_init__(self):
        self.variables = np.array(self.variables, dtype=float)
        if self.variables.ndim != 2 or len(self.variables) < 2:
            raise ValueError("need at least two support states")
        if self.variables.shape[1] not in (2, 3):
            raise ValueError("states are (x, y) or (x, y, heading)")
        if not self.factors:
            self.factors = self._default_factors()

    @classmethod
    def from_trajectory(cls, traj, weights=None, num_states=50, dof=2):
        pts = traj.resampled(num_states).waypoints[:, :2]
        if dof == 3:
            pts = np.column_stack([pts, _headings(pts)])
        return cls(pts, weights or FactorWeights())

    @property
    def num_states(self) -> int:
        return len(self.variables)

    @property
    def dof(self) -> int:
        return self.variables.shape[1]

    @property
    def anchored(self) -> set:
        return {i for f in self.factors if f.kind == "prior" for i in f.indices}

    @property
    def fixed(self) -> set:
        return self.anchored | self.frozen

    def _default_factors(self):
        M, d, w = self.num_states, self.dof, self.weights
        # hard priors: eliminated from the solve, the weight only documents them
        hard = np.eye(d) * 1e12
        fs = [Factor("prior", (0,), hard), Factor("prior", (M - 1,), hard)]
        fs += [Factor("smoothness", (i - 1, i, i + 1), np.eye(d) * w.smoothness) for i in range(1, M - 1)]
        fs += [Factor("obstacle", (i,), np.eye(1) / w.sigma_obs**2) for i in range(M)]
        fs += [Factor("risk", (i,), np.eye(1) / w.sigma_risk**2) for i in range(M)]
        return fs

    def copy(self) -> "FactorGraphProblem":
        return FactorGraphProblem(self.variables.copy(), self.weights, list(self.factors), set(self.frozen))

    def trajectory(self) -> Trajectory:
        return Trajectory(self.variables)


def _headings(pts):
    d = np.diff(pts, axis=0)
    if len(d) == 0:
        return np.zeros(len(pts))
    h = np.arctan2(d[:, 1], d[:, 0])
    h = np.append(h, h[-1])
    return np.unwrap(h)


def fix_factors(problem: FactorGraphProblem, index: int) -> FactorGraphProblem:
    """Freeze one support state so later solves leave it untouched."""
    if not 0 <= index < problem.num_states:
        raise IndexError(f"state index {index} out of range")
    problem.frozen.add(int(index))
    return problem


# -- residuals ----------------------------------------------------------------


def obstacle_residual(world: World, x, eps_obs: float):
    """Hinge ``max(eps_obs - signed_distance(x), 0)``."""
    return np.maximum(eps_obs - world.signed_distance(x), 0.0)


def risk_residual(constraint: RiskConstraint, model: GpModel, x):
    """``f(x) - 1``: zero exactly where the risk constraint holds."""
    f = constraint.cost(model, x)
    return f - 1.0


def residuals(problem, world, model, constraint, X=None, jacobian=True):
    """Stacked whitened residual vector and its Jacobian over all coordinates.

    Total factor cost is ``0.5 * r @ r``.
    """
    X = problem.variables if X is None else X
    M, d = X.shape
    w = problem.weights
    P = X[:, :2]
    rows = []
    J_blocks = []

    sw = math.sqrt(w.smoothness)
    mid = [f.indices for f in problem.factors if f.kind == "smoothness"]
    if mid:
        idx = np.array(mid)
        rs = sw * (X[idx[:, 0]] - 2 * X[idx[:, 1]] + X[idx[:, 2]])
        rows.append(rs.ravel())
        if jacobian:
            Js = np.zeros((len(idx) * d, M * d))
            for k, (a, b, c) in enumerate(idx):
                for j in range(d):
                    r = k * d + j
                    Js[r, a * d + j] += sw
                    Js[r, b * d + j] -= 2 * sw
                    Js[r, c * d + j] += sw
            J_blocks.append(Js)

    obs = np.array([f.indices[0] for f in problem.factors if f.kind == "obstacle"], dtype=int)
    if len(obs):
        sd = world.sdf(P[obs])
        active = sd < w.eps_obs
        ro = np.where(active, w.eps_obs - sd, 0.0) / w.sigma_obs
        rows.append(ro)
        if jacobian:
            Jo = np.zeros((len(obs), M * d))
            g = world.sdf.gradient(P[obs])
            for k, i in enumerate(obs):
                if active[k]:
                    Jo[k, i * d:i * d + 2] = -g[k] / w.sigma_obs
            J_blocks.append(Jo)

    rk = np.array([f.indices[0] for f in problem.factors if f.kind == "risk"], dtype=int)
    if len(rk):
        if jacobian:
            f, grad = constraint.cost_and_gradient(model, P[rk])
        else:
            f = constraint.cost(model, P[rk])
        rows.append((np.atleast_1d(f) - 1.0) / w.sigma_risk)
        if jacobian:
            Jr = np.zeros((len(rk), M * d))
            for k, i in enumerate(rk):
                Jr[k, i * d:i * d + 2] = grad[k] / w.sigma_risk
            J_blocks.append(Jr)

    r = np.concatenate(rows) if rows else np.zeros(0)
    if not jacobian:
        return r
    return r, np.vstack(J_blocks)


def total_cost(problem, world, model, constraint, X=None) -> float:
    r = residuals(problem, world, model, constraint, X, jacobian=False)
    return 0.5 * float(r @ r)


# -- solver -------------------------------------------------------------------


@dataclass
class OptimizeResult:
    trajectory: Trajectory
    iterations: int
    cost: float
    initial_cost: float
    damping: float
    converged: bool
    diverged: bool = False
    cost_history: list = field(default_factory=list)  # costs of accepted iterates

    def stats(self):
        return {
            "iterations": self.iterations,
            "final_cost": self.cost,
            "damping": self.damping,
            "converged": self.converged,
            "diverged": self.diverged,
            "cost_history": [float(c) for c in self.cost_history],
        }


def optimize(problem, world, model, constraint, weights=None, max_iterations=100, gtol=1e-6, ftol=1e-5,
             atol=1e-5, xtol=1e-10, max_rejections=10) -> OptimizeResult:
    """Levenberg-Marquardt on the free (unfrozen, unanchored) coordinates.

    Stops when the gradient infinity-norm drops below ``gtol``, an accepted
    step lowers the cost by less than ``ftol`` relative, the step is below
    ``xtol``, or after ``max_iterations`` trial steps. Ten rejected steps in
    a row end the solve with ``diverged=True``; the best iterate is returned
    and ``problem.variables`` is updated to it.
    """
    if weights is not None and weights != problem.weights:
        problem.weights = weights
        problem.factors = problem._default_factors()
    M, d = problem.variables.shape
    free_states = [i for i in range(M) if i not in problem.fixed]
    cols = np.array([i * d + j for i in free_states for j in range(d)], dtype=int)
    X = problem.variables.copy()
    lo, hi = world.bounds

    r, J = residuals(problem, world, model, constraint, X)
    cost = 0.5 * float(r @ r)
    result = OptimizeResult(problem.trajectory(), 0, cost, cost, 0.0, True, cost_history=[cost])
    if len(cols) == 0:
        return result

    def project(Y):
        Y[:, :2] = np.clip(Y[:, :2], lo, hi)
        return Y

    Jf = J[:, cols]
    A = Jf.T @ Jf
    lam = 1e-3 * max(float(np.max(np.diag(A))), 1e-12)
    nu = 2.0
    rejections = 0
    converged = False
    diverged = False
    it = 0
    while it < max_iterations:
        g = Jf.T @ r
        if np.max(np.abs(g)) < gtol:
            converged = True
            break
        it += 1
        try:
            step = np.linalg.solve(A + lam * np.diag(np.maximum(np.diag(A), 1e-9)), -g)
        except np.linalg.LinAlgError:
            step = -g / lam
        if np.linalg.norm(step) < xtol * (np.linalg.norm(X[:, :].ravel()[cols]) + xtol):
            converged = True
            break
        Y = X.copy()
        Y.ravel()[cols] += step
        Y = project(Y)
        r_new = residuals(problem, world, model, constraint, Y, jacobian=False)
        new_cost = 0.5 * float(r_new @ r_new)
        predicted = -(g @ step + 0.5 * step @ (A @ step))
        if new_cost < cost:
            drop = cost - new_cost
            rel = drop / max(cost, 1e-300)
            X = Y
            cost = new_cost
            result.cost_history.append(cost)
            r, J = residuals(problem, world, model, constraint, X)
            Jf = J[:, cols]
            A = Jf.T @ Jf
            rho = (result.cost_history[-2] - cost) / predicted if predicted > 0 else 0.0
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            rejections = 0
            if rel < ftol or drop < atol:
                converged = True
                break
        else:
            lam *= nu
            nu *= 2.0
            rejections += 1
            if rejections >= max_rejections:
                diverged = True
                break
    if diverged:
        log.warning("optimizer stalled after %d rejected steps", max_rejections)
    problem.variables = X
    result.trajectory = Trajectory(X)
    result.iterations = it
    result.cost = cost
    result.damping = lam
    result.converged = converged
    result.diverged = diverged
    return result


# -- seeding ------------------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _grid_graph(world: World, clearance: float):
    vals = world.sdf.values
    nx, ny = vals.shape
    free = vals > clearance
    ids = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, w = [], [], []
    h = world.sdf.cell_size
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
        a = ids[max(0, -di):nx - max(0, di), max(0, -dj):ny - max(0, dj)]
        b = ids[max(0, di):nx + min(0, di), max(0, dj):ny + min(0, dj)]
        ok = free.ravel()[a.ravel()] & free.ravel()[b.ravel()]
        rows.append(a.ravel()[ok])
        cols.append(b.ravel()[ok])
        w.append(np.full(ok.sum(), h * math.hypot(di, dj)))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    ww = np.concatenate(w)
    G = coo_matrix((ww, (r, c)), shape=(nx * ny, nx * ny)).tocsr()
    return G, free


def _grid_path(world, start, goal, clearance):
    G, free = _grid_graph(world, clearance)
    nx, ny = free.shape
    h = world.sdf.cell_size
    node_xy = lambda k: world.sdf.origin + h * np.array(divmod(k, ny))

    def nearest_free(p):
        ij = np.round((p - world.sdf.origin) / h).astype(int)
        best, best_d = None, math.inf
        for di in range(-3, 4):
            for dj in range(-3, 4):
                i, j = ij[0] + di, ij[1] + dj
                if 0 <= i < nx and 0 <= j < ny and free[i, j]:
                    q = world.sdf.origin + h * np.array([i, j])
                    dd = float(np.linalg.norm(q - p))
                    if dd < best_d and world.collision_free(p, q):
                        best, best_d = i * ny + j, dd
        return best

    s = nearest_free(start)
    g = nearest_free(goal)
    if s is None or g is None:
        return None
    dist, pred = dijkstra(G, directed=False, indices=s, return_predecessors=True)
    if not np.isfinite(dist[g]):
        return None
    nodes = [g]
    while nodes[-1] != s:
        nodes.append(pred[nodes[-1]])
    pts = [start] + [node_xy(k) for k in nodes[::-1]] + [goal]
    return np.array(pts)


def _shortcut(world, pts):
    """Greedy line-of-sight pruning of a grid path."""
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not world.collision_free(pts[i], pts[j]):
            j -= 1
        out.append(pts[j])
        i = j
    return np.array(out)


def initial_trajectory(start, goal, world: World, num_states=50, clearance=None) -> Trajectory:
    """Collision-free seed: the straight line, else a shortest grid path.

    Grid paths keep ``clearance`` from obstacles when possible and fall back
    to plain free space. Raises :class:`NoPathError` if nothing connects.
    """
    start = np.asarray(start, dtype=float)[:2]
    goal = np.asarray(goal, dtype=float)[:2]
    if np.allclose(start, goal):
        return Trajectory([start, goal])
    if world.collision_free(start, goal):
        return Trajectory([start, goal]).resampled(num_states)
    levels = [0.0] if clearance is None else [clearance, 0.0]
    if clearance is None:
        levels = [0.5, 0.25, 0.0]
    for c in levels:
        pts = _grid_path(world, start, goal, c)
        if pts is not None:
            pts = _shortcut(world, pts)
            traj = Trajectory(pts).resampled(num_states)
            if world.path_collision_free(traj.waypoints):
                return traj
    raise NoPathError("no collision-free path between start and goal")


# -- episode ------------------------------------------------------------------


@dataclass
class SmoothConfig:
    num_states: int = 50
    dof: int = 2
    max_iterations: int = 100
    goal_radius: float | None = None
    max_steps: int | None = None
    measure_cold: bool = True

    def __post_init__(self):
        if self.num_states < 2:
            raise ValueError("num_states must be >= 2")
        if self.dof not in (2, 3):
            raise ValueError("dof must be 2 or 3")


def run_episode_igp(world: World, start, goal, constraint: RiskConstraint, weights: FactorWeights,
                    kernel, rng, cfg: SmoothConfig | None = None) -> EpisodeTrace:
    """Optimize, move one support state, observe, freeze it; repeat until goal.

    With ``cfg.measure_cold`` every step also solves the same problem from a
    fresh seed so that warm and cold iteration counts can be compared.
    """
    cfg = cfg or SmoothConfig()
    t_start = time.perf_counter()
    start = np.asarray(start, dtype=float)[:2]
    goal = np.asarray(goal, dtype=float)[:2]
    trace = EpisodeTrace(meta={"planner": "smooth"})

    model = GpModel(kernel, world.sensor_noise, bounds=world.bounds)
    x = start
    z = world.observe(x, rng)
    model.add_observation(x, z)

    seed = initial_trajectory(start, goal, world, cfg.num_states, clearance=weights.eps_obs)
    problem = FactorGraphProblem.from_trajectory(seed, weights, cfg.num_states, cfg.dof)
    trace.steps.append(StepRecord(0, problem.variables[0], z, world.hazard(x), None))
    fix_factors(problem, 0)
    M = problem.num_states
    spacing = seed.length / max(M - 1, 1)
    radius = cfg.goal_radius if cfg.goal_radius is not None else spacing
    max_steps = cfg.max_steps or max(M, int(math.ceil(10 * world.diameter / max(spacing, 1e-9))))
    trace.plans.append(PlanRecord(-1, 0, seed.waypoints, 0.0, {"seed": True}))

    cur = 0
    step = 0
    warm_its, cold_its = [], []
    opt_time = 0.0
    while np.linalg.norm(x - goal) > radius and cur < M - 1:
        if step >= max_steps:
            trace.status = "timeout"
            break
        t0 = time.perf_counter()
        res = optimize(problem, world, model, constraint, max_iterations=cfg.max_iterations)
        opt_time += time.perf_counter() - t0
        stats = res.stats()
        warm_its.append(res.iterations)
        if cfg.measure_cold:
            cold = _cold_problem(problem, world, cur, cfg)
            cres = optimize(cold, world, model, constraint, max_iterations=cfg.max_iterations)
            stats["cold_iterations"] = cres.iterations
            stats["cold_cost_history"] = [float(c) for c in cres.cost_history]
            cold_its.append(cres.iterations)
        trace.plans.append(PlanRecord(step, step, problem.variables.copy(), res.cost, res.stats()))
        cur += 1
        step += 1
        x = problem.variables[cur, :2].copy()
        z = world.observe(x, rng)
        model.add_observation(x, z)
        fix_factors(problem, cur)
        trace.steps.append(StepRecord(step, problem.variables[cur], z, world.hazard(x), step - 1, False, stats))

    if trace.status == "running":
        trace.status = "goal"
    trace.dataset_points = model.points.copy()
    trace.dataset_values = model.values.copy()
    trace.meta["warm_iterations_mean"] = float(np.mean(warm_its)) if warm_its else 0.0
    if cold_its:
        trace.meta["cold_iterations_mean"] = float(np.mean(cold_its))
    trace.timings = {"total_s": time.perf_counter() - t_start, "optimizer_s": opt_time}
    return trace


def _cold_problem(problem, world, cur, cfg):
    """Same factors and frozen prefix, remaining states re-seeded from scratch."""
    cold = problem.copy()
    rest = cold.num_states - cur
    head = cold.variables[cur, :2]
    goal = cold.variables[-1, :2]
    try:
        seed = initial_trajectory(head, goal, world, rest, clearance=problem.weights.eps_obs)
        pts = seed.resampled(rest).waypoints
    except NoPathError:
        pts = Trajectory([head, goal]).resampled(rest).waypoints
    if cold.dof == 3:
        pts = np.column_stack([pts, _headings(pts)])
        pts[0, 2] = cold.variables[cur, 2]
        pts[-1, 2] = cold.variables[-1, 2]
    cold.variables[cur:] = pts
    return cold

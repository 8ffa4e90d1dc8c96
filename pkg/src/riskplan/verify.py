"""Self-check against independent numerical oracles.

Each check pairs a production routine with a slow but obviously correct
reference: Monte-Carlo sampling for the tail metrics, a dense linear solve for
the GP, central differences for gradients, and a refined quadrature for the
edge integral.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import RiskConstraint
from .gp import GaussianBelief, GpModel, SquaredExponential
from .graph_planner import edge_cost
from .risk import RiskMetric, cvar, value_at_risk
from .world import HazardSource, World


@dataclass
class OracleResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tolerance)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name:<36s} error={self.error:.3e}  tol={self.tolerance:.1e}"


def mc_tail(beta, n=10**7, seed=0, chunk=10**6):
    """Upper-tail VaR and CVaR of N(0, 1) from n samples."""
    rng = np.random.default_rng(seed)
    z = np.concatenate([rng.standard_normal(min(chunk, n - i)) for i in range(0, n, chunk)])
    k = int(np.ceil(beta * n))
    tail = np.partition(z, n - k)[n - k:]
    return float(tail.min()), float(tail.mean())


def check_risk(betas=(0.01, 0.05, 0.2, 0.5), n=10**7, seed=0):
    out = []
    for b in betas:
        var_mc, cvar_mc = mc_tail(b, n, seed)
        unit = GaussianBelief(0.0, 1.0)
        # the median is zero, so score it on the absolute scale
        scale = lambda ref: max(abs(ref), 1.0) if b == 0.5 else abs(ref)
        out.append(OracleResult(f"var beta={b} vs monte carlo", abs(value_at_risk(unit, b) - var_mc) / scale(var_mc), 5e-3))
        out.append(OracleResult(f"cvar beta={b} vs monte carlo", abs(cvar(unit, b) - cvar_mc) / scale(cvar_mc), 5e-3))
    return out


def _dense_posterior(kernel, noise, X, z, Q):
    # explicit covariance and Gaussian elimination, no factorization reuse
    K = np.array([[kernel(a[None], b[None])[0, 0] for b in X] for a in X]) + noise * np.eye(len(X))
    kq = np.array([[kernel(q[None], b[None])[0, 0] for b in X] for q in Q])
    mean = kq @ np.linalg.solve(K, z)
    var = kernel.signal_variance - np.einsum("ij,ji->i", kq, np.linalg.solve(K, kq.T))
    return mean, var


def check_gp(kernel=None, noise=0.5, bounds=((0.0, 0.0), (20.0, 20.0)), n=50, trials=5, seed=0):
    kernel = kernel or SquaredExponential()
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(bounds, dtype=float)
    worst_dense = worst_inc = 0.0
    for _ in range(trials):
        X = rng.uniform(lo, hi, (n, 2))
        z = rng.normal(0, 5, n)
        Q = rng.uniform(lo, hi, (20, 2))
        batch = GpModel(kernel, noise, bounds, X, z)
        inc = GpModel(kernel, noise, bounds)
        for x, v in zip(X, z):
            inc.add_observation(x, v)
        m, v = _dense_posterior(kernel, noise, X, z, Q)
        pb, pi = batch.posterior(Q), inc.posterior(Q)
        worst_dense = max(worst_dense, np.abs(pb.mean - m).max(), np.abs(pb.variance - np.clip(v, 0, None)).max())
        worst_inc = max(worst_inc, np.abs(pb.mean - pi.mean).max(), np.abs(pb.variance - pi.variance).max())
    return [
        OracleResult(f"gp posterior vs dense solve (N={n})", float(worst_dense), 1e-8),
        OracleResult("gp incremental vs batch", float(worst_inc), 1e-8),
    ]


def _central(fn, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    return np.array([(fn(x + e) - fn(x - e)) / (2 * h) for e in np.eye(len(x)) * h])


def _hazard_model(world, kernel, n, rng):
    lo, hi = world.bounds
    X = rng.uniform(lo, hi, (n, 2))
    # a few samples around each peak so the constraint is violated somewhere
    near = [np.clip(s.peak + rng.normal(0, 1.0, (5, 2)), lo, hi) for s in world.sources]
    X = np.vstack([X] + near)
    z = world.hazard(X) + rng.normal(0, np.sqrt(world.sensor_noise), len(X))
    return GpModel(kernel, world.sensor_noise, world.bounds, X, z)


def check_derivative(world, kernel, configs=100, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    lo, hi = world.bounds
    for _ in range(configs):
        model = _hazard_model(world, kernel, int(rng.integers(5, 40)), rng)
        q = rng.uniform(lo + 0.5, hi - 0.5)
        an = model.posterior_derivative(q).mean
        fd = _central(lambda p: model.posterior(p).mean, q)
        worst = max(worst, np.linalg.norm(an - fd) / max(np.linalg.norm(fd), 1e-6))
    return [OracleResult("posterior derivative vs central diff", float(worst), 1e-4)]


def check_gradient(world, kernel, alpha, gamma, states=100, seed=0):
    rng = np.random.default_rng(seed)
    model = _hazard_model(world, kernel, 60, rng)
    c = RiskConstraint(RiskMetric("expected"), alpha=alpha, gamma=gamma)
    lo, hi = world.bounds
    worst, found, tries = 0.0, 0, 0
    while found < states and tries < 200 * states:
        tries += 1
        x = rng.uniform(lo + 0.5, hi - 0.5)
        if c.phi(model, x) >= -1e-3:
            continue
        found += 1
        fd = _central(lambda p: c.cost(model, p), x)
        an = c.cost_gradient(model, x)
        worst = max(worst, np.linalg.norm(an - fd) / max(np.linalg.norm(fd), 1e-12))
    if found < states:
        worst = float("inf")
    return [OracleResult(f"cost gradient vs central diff ({found} states)", float(worst), 1e-3)]


def check_quadrature(world, kernel, constraint, segments=100, seed=0, step=0.1):
    rng = np.random.default_rng(seed)
    model = _hazard_model(world, kernel, 60, rng)
    lo, hi = world.bounds
    worst_rel, worst_len = 0.0, 0.0
    for _ in range(segments):
        a, b = rng.uniform(lo, hi, (2, 2))
        coarse = edge_cost(constraint, model, a, b, step)
        fine = edge_cost(constraint, model, a, b, step / 100)
        worst_rel = max(worst_rel, abs(coarse - fine) / fine)
        worst_len = max(worst_len, np.linalg.norm(b - a) - coarse)
    return [
        OracleResult("edge cost vs 100x finer quadrature", float(worst_rel), 1e-2),
        OracleResult("edge cost minus length (<= 0)", float(max(worst_len, 0.0)), 1e-12),
    ]


def run_suite(scenario=None, mc_samples=10**7):
    """Run every oracle; settings come from ``scenario`` when one is given."""
    if scenario is None:
        world = World(sources=[HazardSource((7, 7)), HazardSource((13, 13), tau=0.25)])
        kernel = SquaredExponential()
        constraint = RiskConstraint(RiskMetric("cvar", 0.05), 30.0, 0.1)
    else:
        world, kernel, constraint = scenario.world_obj(), scenario.kernel, scenario.constraint
    if not world.sources:
        # a hazard-free world leaves nothing to violate; borrow a source
        world = World(world.bounds, world.obstacles, [HazardSource(np.mean(world.bounds, axis=0))],
                      world.sensor_noise)
    results = check_risk(n=mc_samples)
    results += check_gp(kernel, world.sensor_noise, world.bounds)
    results += check_derivative(world, kernel)
    results += check_gradient(world, kernel, constraint.alpha, constraint.gamma)
    results += check_quadrature(world, kernel, constraint)
    return results

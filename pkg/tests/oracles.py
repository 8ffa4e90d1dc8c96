"""Independent reference computations used by the test-suite.

Nothing here calls into the code under test beyond plain data classes.
"""

import heapq
import math

import numpy as np


def naive_kernel(a, b, signal_variance, lengthscales):
    """Squared-exponential covariance by explicit loops."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    K = np.empty((len(a), len(b)))
    for i in range(len(a)):
        for j in range(len(b)):
            s = 0.0
            for d in range(a.shape[1]):
                s += ((a[i, d] - b[j, d]) / lengthscales[d]) ** 2
            K[i, j] = signal_variance * math.exp(-0.5 * s)
    return K


def dense_posterior(X, z, q, signal_variance, lengthscales, noise):
    """Posterior mean/variance with an explicit Gram matrix and LU solves."""
    K = naive_kernel(X, X, signal_variance, lengthscales) + noise * np.eye(len(X))
    k = naive_kernel(X, q, signal_variance, lengthscales)
    mean = k.T @ np.linalg.solve(K, z)
    var = signal_variance - np.sum(k * np.linalg.solve(K, k), axis=0)
    return mean, var


def central_difference(fn, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for d in range(len(x)):
        e = np.zeros_like(x)
        e[d] = h
        g[d] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def monte_carlo_tail(mean, std, beta, n=10_000_000, seed=0, chunk=2_000_000):
    """Empirical upper-tail VaR and CVaR from n normal draws."""
    rng = np.random.default_rng(seed)
    samples = np.concatenate([rng.standard_normal(min(chunk, n - i)) for i in range(0, n, chunk)])
    samples = mean + std * samples
    var = np.quantile(samples, 1.0 - beta)
    return var, samples[samples > var].mean()


def segment_rect_intersects(a, b, lo, hi):
    """Exact slab test: does the closed segment a-b meet the open box?"""
    a = np.asarray(a, float)
    d = np.asarray(b, float) - a
    t0, t1 = 0.0, 1.0
    for k in range(2):
        if abs(d[k]) < 1e-15:
            if not lo[k] < a[k] < hi[k]:
                return False
            continue
        u = (lo[k] - a[k]) / d[k]
        v = (hi[k] - a[k]) / d[k]
        u, v = min(u, v), max(u, v)
        t0, t1 = max(t0, u), min(t1, v)
        if t0 >= t1:
            return False
    return True


def segment_circle_distance(a, b, c):
    a, b, c = (np.asarray(v, float) for v in (a, b, c))
    d = b - a
    L2 = d @ d
    t = 0.0 if L2 == 0 else np.clip((c - a) @ d / L2, 0.0, 1.0)
    return float(np.linalg.norm(a + t * d - c))


def boundary_samples(obstacle, spacing):
    """Points along an obstacle outline, at most ``spacing`` apart."""
    if hasattr(obstacle, "radius"):
        n = max(int(math.ceil(2 * math.pi * obstacle.radius / spacing)), 8)
        t = np.linspace(0, 2 * math.pi, n, endpoint=False)
        return np.asarray(obstacle.center) + obstacle.radius * np.stack([np.cos(t), np.sin(t)], 1)
    lo, hi = np.asarray(obstacle.lo), np.asarray(obstacle.hi)
    corners = [lo, np.array([hi[0], lo[1]]), hi, np.array([lo[0], hi[1]]), lo]
    pts = []
    for p, q in zip(corners[:-1], corners[1:]):
        n = max(int(math.ceil(np.linalg.norm(q - p) / spacing)), 1)
        t = np.linspace(0, 1, n, endpoint=False)[:, None]
        pts.append(p + t * (q - p))
    return np.vstack(pts)


def grid_astar(free, start, goal, h):
    """Plain 8-connected A* over a boolean node grid; returns path cost or inf."""
    nx, ny = free.shape
    moves = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj]
    heur = lambda p: h * math.hypot(p[0] - goal[0], p[1] - goal[1])
    best = {start: 0.0}
    pq = [(heur(start), 0.0, start)]
    while pq:
        _, g, p = heapq.heappop(pq)
        if p == goal:
            return g
        if g > best.get(p, math.inf):
            continue
        for di, dj in moves:
            q = (p[0] + di, p[1] + dj)
            if 0 <= q[0] < nx and 0 <= q[1] < ny and free[q]:
                ng = g + h * math.hypot(di, dj)
                if ng < best.get(q, math.inf):
                    best[q] = ng
                    heapq.heappush(pq, (ng + heur(q), ng, q))
    return math.inf

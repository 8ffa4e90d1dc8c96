"""Ground-truth environment: bounds, obstacles, signed distance and hazard field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Rect",
    "Circle",
    "HazardSource",
    "SignedDistanceGrid",
    "World",
    "obstacle_from_dict",
]


@dataclass(frozen=True)
class Rect:
    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(map(float, self.lo)))
        object.__setattr__(self, "hi", tuple(map(float, self.hi)))
        if not all(h > l for l, h in zip(self.lo, self.hi)):
            raise ValueError("rectangle needs hi > lo on every axis")

    def signed_distance(self, p) -> np.ndarray:
        p = np.atleast_2d(p)
        c = (np.asarray(self.lo) + np.asarray(self.hi)) / 2
        half = (np.asarray(self.hi) - np.asarray(self.lo)) / 2
        q = np.abs(p - c) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside

    def contains(self, p) -> np.ndarray:
        p = np.atleast_2d(p)
        return np.all((p > self.lo) & (p < self.hi), axis=1)

    def to_dict(self):
        return {"type": "rect", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(map(float, self.center)))
        if not self.radius > 0:
            raise ValueError("circle radius must be > 0")

    def signed_distance(self, p) -> np.ndarray:
        p = np.atleast_2d(p)
        return np.linalg.norm(p - np.asarray(self.center), axis=1) - self.radius

    def contains(self, p) -> np.ndarray:
        return self.signed_distance(p) < 0.0

    def to_dict(self):
        return {"type": "circle", "center": list(self.center), "radius": self.radius}


def obstacle_from_dict(d):
    kind = d.get("type")
    if kind == "rect":
        return Rect(d["lo"], d["hi"])
    if kind == "circle":
        return Circle(d["center"], d["radius"])
    raise ValueError(f"unknown obstacle type {kind!r}")


@dataclass(frozen=True)
class HazardSource:
    """Gaussian bump of height ``k`` orbiting ``center`` at phase ``tau``."""

    center: tuple[float, float]
    k: float = 100.0
    tau: float = 0.0
    decay: tuple[float, float] = (1.1, 0.9)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(map(float, self.center)))
        object.__setattr__(self, "decay", tuple(map(float, self.decay)))
        if not all(d > 0 for d in self.decay):
            raise ValueError("decay constants must be > 0")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")

    @property
    def peak(self) -> np.ndarray:
        a = 2.0 * np.pi * self.tau
        return np.asarray(self.center) + 1.5 * np.array([np.sin(a), np.cos(a)])

    def __call__(self, p, squared: bool = True) -> np.ndarray:
        u = (np.atleast_2d(p) - self.peak) / np.asarray(self.decay)
        if squared:
            return self.k * np.exp(-np.sum(u * u, axis=1))
        # literal, unsquared exponents: unbounded away from the peak
        return self.k * np.exp(-np.sum(u, axis=1))

    def to_dict(self):
        return {"center": list(self.center), "k": self.k, "tau": self.tau, "decay": list(self.decay)}


@dataclass(frozen=True)
class SignedDistanceGrid:
    """Signed distance sampled at grid nodes; bilinear interpolation between."""

    origin: np.ndarray
    cell_size: float
    values: np.ndarray  # indexed [ix, iy]

    def _locate(self, p):
        p = np.atleast_2d(p)
        g = (p - self.origin) / self.cell_size
        nx, ny = self.values.shape
        i = np.clip(np.floor(g[:, 0]).astype(int), 0, nx - 2)
        j = np.clip(np.floor(g[:, 1]).astype(int), 0, ny - 2)
        tx = np.clip(g[:, 0] - i, 0.0, 1.0)
        ty = np.clip(g[:, 1] - j, 0.0, 1.0)
        return i, j, tx, ty

    def __call__(self, p) -> np.ndarray:
        i, j, tx, ty = self._locate(p)
        v = self.values
        return (
            v[i, j] * (1 - tx) * (1 - ty)
            + v[i + 1, j] * tx * (1 - ty)
            + v[i, j + 1] * (1 - tx) * ty
            + v[i + 1, j + 1] * tx * ty
        )

    def gradient(self, p) -> np.ndarray:
        """Exact gradient of the bilinear interpolant, shape (m, 2)."""
        i, j, tx, ty = self._locate(p)
        v = self.values
        gx = ((v[i + 1, j] - v[i, j]) * (1 - ty) + (v[i + 1, j + 1] - v[i, j + 1]) * ty) / self.cell_size
        gy = ((v[i, j + 1] - v[i, j]) * (1 - tx) + (v[i + 1, j + 1] - v[i + 1, j]) * tx) / self.cell_size
        return np.stack([gx, gy], axis=1)


class World:
    """Rectangular 2-D environment with known obstacles and an unknown hazard.

    The world boundary counts as an obstacle for signed-distance purposes,
    so an empty world reports the distance to the nearest edge.
    """

    def __init__(
        self,
        bounds=((0.0, 0.0), (20.0, 20.0)),
        obstacles=(),
        sources=(),
        sensor_noise=0.5,
        sdf_resolution=0.1,
        squared_exponent=True,
    ):
        self.bounds = np.asarray(bounds, dtype=float).reshape(2, 2)
        if not np.all(self.bounds[1] > self.bounds[0]):
            raise ValueError("bounds need upper > lower")
        if sensor_noise < 0:
            raise ValueError("sensor_noise must be >= 0")
        if not sdf_resolution > 0:
            raise ValueError("sdf_resolution must be > 0")
        self.obstacles = tuple(obstacles)
        self.sources = tuple(sources)
        self.sensor_noise = float(sensor_noise)
        self.squared_exponent = bool(squared_exponent)
        self.sdf_resolution = float(sdf_resolution)
        self.sdf = self._build_sdf(self.sdf_resolution)
        nodes = self.grid_nodes(self.sdf.cell_size)
        if np.all(self.in_obstacle(np.stack(np.meshgrid(*nodes, indexing="ij"), -1).reshape(-1, 2))):
            raise ValueError("free space is empty")

    # -- geometry -----------------------------------------------------------

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.bounds[1] - self.bounds[0]))

    @property
    def cell_size(self) -> float:
        return self.sdf.cell_size

    def grid_nodes(self, resolution):
        lo, hi = self.bounds
        n = np.maximum(np.round((hi - lo) / resolution).astype(int), 1)
        return [np.linspace(lo[k], hi[k], n[k] + 1) for k in range(2)]

    def in_bounds(self, p, tol=1e-9) -> np.ndarray:
        p = np.atleast_2d(p)
        return np.all((p >= self.bounds[0] - tol) & (p <= self.bounds[1] + tol), axis=1)

    def in_obstacle(self, p) -> np.ndarray:
        p = np.atleast_2d(p)
        hit = np.zeros(len(p), dtype=bool)
        for ob in self.obstacles:
            hit |= ob.contains(p)
        return hit

    def is_free(self, p) -> np.ndarray:
        return self.in_bounds(p) & ~self.in_obstacle(p)

    def exact_signed_distance(self, p) -> np.ndarray:
        p = np.atleast_2d(p)
        lo, hi = self.bounds
        d = np.min(np.concatenate([p - lo, hi - p], axis=1), axis=1)
        for ob in self.obstacles:
            d = np.minimum(d, ob.signed_distance(p))
        return d

    def _build_sdf(self, resolution):
        lo, hi = self.bounds
        n = np.ceil((hi - lo) / resolution - 1e-9).astype(int)
        xs, ys = (lo[k] + resolution * np.arange(n[k] + 1) for k in range(2))
        P = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1).reshape(-1, 2)
        vals = self.exact_signed_distance(P).reshape(len(xs), len(ys))
        return SignedDistanceGrid(origin=lo.copy(), cell_size=resolution, values=vals)

    def signed_distance(self, p):
        d = self.sdf(p)
        return float(d[0]) if np.ndim(p) == 1 else d

    def collision_free(self, a, b) -> bool:
        """Sample the segment at most half a cell apart and test every sample."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        n = int(np.ceil(np.linalg.norm(b - a) / (0.5 * self.cell_size))) + 1
        t = np.linspace(0.0, 1.0, max(n, 2))[:, None]
        return bool(np.all(self.is_free(a + t * (b - a))))

    def path_collision_free(self, waypoints) -> bool:
        w = np.asarray(waypoints)
        return all(self.collision_free(w[i], w[i + 1]) for i in range(len(w) - 1))

    # -- hazard -------------------------------------------------------------

    def hazard(self, p):
        P = np.atleast_2d(np.asarray(p, dtype=float))
        g = np.zeros(len(P))
        for s in self.sources:
            g += s(P, squared=self.squared_exponent)
        return float(g[0]) if np.ndim(p) == 1 else g

    def observe(self, p, rng: np.random.Generator):
        """One noisy reading of the hazard; consumes one normal draw per state."""
        g = self.hazard(p)
        noise = rng.normal(0.0, np.sqrt(self.sensor_noise), size=np.shape(g))
        return float(g + noise) if np.ndim(g) == 0 else g + noise

    def field_grid(self, fn, resolution):
        """Evaluate ``fn`` on a node grid; returns (xs, ys, values[iy, ix])."""
        xs, ys = self.grid_nodes(resolution)
        X, Y = np.meshgrid(xs, ys)
        vals = np.asarray(fn(np.stack([X.ravel(), Y.ravel()], axis=1))).reshape(X.shape)
        return xs, ys, vals

    def to_dict(self):
        return {
            "bounds": self.bounds.tolist(),
            "obstacles": [ob.to_dict() for ob in self.obstacles],
            "sources": [s.to_dict() for s in self.sources],
            "sigma_n2": self.sensor_noise,
            "sdf_resolution": self.sdf_resolution,
            "squared_exponent": self.squared_exponent,
        }

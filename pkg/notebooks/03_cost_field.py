"""
From risk to path cost
======================

The exponential risk cost turns a constraint violation into a length penalty.
"""

import numpy as np

from riskplan import GpModel, HazardSource, RiskConstraint, RiskMetric, SquaredExponential, World, edge_cost

world = World(sources=[HazardSource((10, 8.5))])
rng = np.random.default_rng(1)
# the agent has already been near the peak at (10, 10)
X = np.vstack([rng.uniform(0, 20, (150, 2)), rng.normal(10, 1.5, (40, 2))])
model = GpModel(SquaredExponential(200.0, (1.2, 1.2)), 0.5, world.bounds, X, world.observe(X, rng))

c = RiskConstraint(RiskMetric("cvar", 0.05), alpha=30.0, gamma=0.1)
xs, ys, f = world.field_grid(lambda P: c.cost(model, P), 0.25)
print(f"cost field: min {f.min():.2f}, max {f.max():.3g}, share penalized {np.mean(f > 1):.1%}")

# the straight line crosses the peak, a detour does not
for name, (a, b) in {"through peak": ([2, 10], [18, 10]), "detour": ([2, 16], [18, 16])}.items():
    a, b = np.array(a, float), np.array(b, float)
    print(f"{name:13s} length {np.linalg.norm(b - a):5.1f}  cost {edge_cost(c, model, a, b):8.1f}")

"""
Learning a hazard field from noisy samples
==========================================

A GP posterior after a handful of readings, compared to the true field.
"""

import numpy as np

from riskplan import GpModel, HazardSource, SquaredExponential, World

world = World(sources=[HazardSource((7, 7)), HazardSource((13, 13), tau=0.25)])
rng = np.random.default_rng(0)

model = GpModel(SquaredExponential(200.0, (1.2, 1.2)), world.sensor_noise, world.bounds)
for n in (10, 40, 160):
    while len(model) < n:
        x = rng.uniform(0, 20, 2)
        model.add_observation(x, world.observe(x, rng))
    xs, ys, truth = world.field_grid(world.hazard, 0.5)
    _, _, mean = world.field_grid(lambda P: model.posterior(P).mean, 0.5)
    _, _, var = world.field_grid(lambda P: model.posterior(P).variance, 0.5)
    print(f"N={n:4d}  rms error {np.sqrt(np.mean((mean - truth) ** 2)):6.2f}  "
          f"mean std {np.sqrt(var).mean():5.2f}")

# slope of the estimate, with its own uncertainty
d = model.posterior_derivative([9.0, 9.0])
print("gradient at (9, 9):", np.round(d.mean, 2), "+/-", np.round(np.sqrt(d.variance), 2))

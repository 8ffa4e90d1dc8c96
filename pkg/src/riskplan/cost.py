"""Risk-aware threshold constraint and the exponential risk cost field."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gp import GaussianBelief, GpModel
from .risk import RiskMetric

__all__ = ["RiskConstraint", "EXPONENT_CAP"]

EXPONENT_CAP = 700.0


@dataclass(frozen=True)
class RiskConstraint:
    """``phi(x) = alpha - metric(posterior(x))``; violated where negative.

    ``gamma`` scales how sharply the cost ``max(exp(-gamma * phi), 1)`` grows
    with the violation.
    """

    metric: RiskMetric = field(default_factory=RiskMetric)
    alpha: float = 30.0
    gamma: float = 0.1

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")

    def phi(self, model: GpModel, x):
        return self.alpha - self.metric.apply(model.posterior(x))

    def cost(self, model: GpModel, x, return_saturated: bool = False):
        """f(x) >= 1, equal to 1 exactly where the constraint holds.

        The exponent is capped at ``EXPONENT_CAP``; with
        ``return_saturated=True`` a mask of capped entries is also returned.
        """
        phi = self.phi(model, x)
        f, saturated = self._cost_from_phi(phi)
        return (f, saturated) if return_saturated else f

    def _cost_from_phi(self, phi):
        expo = -self.gamma * np.asarray(phi, dtype=float)
        saturated = expo > EXPONENT_CAP
        f = np.where(expo > 0.0, np.exp(np.minimum(expo, EXPONENT_CAP)), 1.0)
        if f.ndim == 0:
            return float(f), bool(saturated)
        return f, saturated

    def cost_gradient(self, model: GpModel, x) -> np.ndarray:
        """Conservative gradient of the cost field.

        The derivative of the risk is replaced by the risk of the GP
        derivative: each dimension's derivative belief goes through the same
        metric and beta. Zero wherever phi >= 0, including the boundary.
        """
        return self.cost_and_gradient(model, x)[1]

    def cost_and_gradient(self, model: GpModel, x):
        x = np.asarray(x, dtype=float)
        phi = np.atleast_1d(self.phi(model, x))
        f, _ = self._cost_from_phi(phi)
        f = np.atleast_1d(f)
        X = np.atleast_2d(x)
        grad = np.zeros(X.shape)
        bad = phi < 0.0
        if np.any(bad):
            d = model.posterior_derivative(X[bad])
            risk_d = self.metric.apply(GaussianBelief(d.mean, d.variance))
            grad[bad] = self.gamma * np.asarray(risk_d) * f[bad][:, None]
        if x.ndim == 1:
            return float(f[0]), grad[0]
        return f, grad

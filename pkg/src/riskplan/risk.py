"""Closed-form VaR and CVaR of Gaussian beliefs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .gp import GaussianBelief

__all__ = ["RiskMetric", "value_at_risk", "cvar", "expected_value"]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_TAILS = ("upper", "lower")
_KINDS = ("expected", "var", "cvar")


def _check(beta, tail):
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    if tail not in _TAILS:
        raise ValueError(f"tail must be one of {_TAILS}, got {tail!r}")


def _std(belief):
    var = np.asarray(belief.variance, dtype=float)
    if np.any(var < 0):
        raise ValueError("belief variance must be >= 0")
    return np.sqrt(var)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def expected_value(belief: GaussianBelief):
    return belief.mean


def value_at_risk(belief: GaussianBelief, beta: float, tail: str = "upper"):
    """(1 - beta)-quantile for the upper tail, beta-quantile for the lower."""
    _check(beta, tail)
    q = ndtri(1.0 - beta) if tail == "upper" else ndtri(beta)
    return _scalar(np.asarray(belief.mean) + _std(belief) * q)


def cvar(belief: GaussianBelief, beta: float, tail: str = "upper"):
    """Mean of the beta-mass tail beyond the VaR of a Gaussian belief."""
    _check(beta, tail)
    q = ndtri(1.0 - beta)
    spread = _INV_SQRT_2PI * np.exp(-0.5 * q * q) / beta
    sign = 1.0 if tail == "upper" else -1.0
    return _scalar(np.asarray(belief.mean) + sign * _std(belief) * spread)


@dataclass(frozen=True)
class RiskMetric:
    """A risk measure choice: ``kind`` in {"expected", "var", "cvar"}."""

    kind: str = "cvar"
    beta: float = 0.05
    tail: str = "upper"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"metric kind must be one of {_KINDS}, got {self.kind!r}")
        _check(self.beta, self.tail)

    def __call__(self, belief: GaussianBelief):
        return self.apply(belief)

    def apply(self, belief: GaussianBelief):
        if self.kind == "expected":
            return _scalar(np.asarray(belief.mean, dtype=float))
        if self.kind == "var":
            return value_at_risk(belief, self.beta, self.tail)
        return cvar(belief, self.beta, self.tail)

    def with_beta(self, beta: float) -> "RiskMetric":
        return RiskMetric(self.kind, beta, self.tail)

    def to_dict(self):
        return {"type": self.kind, "beta": self.beta, "tail": self.tail}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d.get("type", "cvar"), beta=d.get("beta", 0.05), tail=d.get("tail", "upper"))

"""Exact Gaussian-process regression over scalar spatial fields.

The model keeps a Cholesky factor of ``K + noise * I`` that grows by one row
per appended observation, so online use inside an episode loop costs O(N^2)
per sample instead of a full O(N^3) refactorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = [
    "GaussianBelief",
    "SquaredExponential",
    "GpModel",
    "DomainError",
]

_JITTER = 1e-10
_BOUNDS_TOL = 1e-9


class DomainError(ValueError):
    """Raised for queries or samples outside the modelled domain."""


@dataclass(frozen=True)
class GaussianBelief:
    """Mean/variance pair. Fields may be scalars or same-shaped arrays."""

    mean: float | np.ndarray
    variance: float | np.ndarray

    @property
    def std(self):
        return np.sqrt(self.variance)


@dataclass(frozen=True)
class SquaredExponential:
    """k(a, b) = s * exp(-0.5 * sum(((a - b) / l) ** 2))."""

    signal_variance: float = 50.0
    lengthscales: tuple[float, ...] = (2.0, 2.0)
    name: str = "squared-exponential"

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be > 0")
        if not all(v > 0 for v in ls):
            raise ValueError("lengthscales must be > 0")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def __call__(self, a, b) -> np.ndarray:
        """Cross-covariance matrix between rows of ``a`` (n, d) and ``b`` (m, d)."""
        ls = np.asarray(self.lengthscales)
        a = np.atleast_2d(a) / ls
        b = np.atleast_2d(b) / ls
        sq = (
            np.sum(a**2, axis=1)[:, None]
            + np.sum(b**2, axis=1)[None, :]
            - 2.0 * a @ b.T
        )
        return self.signal_variance * np.exp(-0.5 * np.maximum(sq, 0.0))

    def diag(self, x) -> np.ndarray:
        return np.full(np.atleast_2d(x).shape[0], self.signal_variance)

    def grad_first(self, a, b) -> np.ndarray:
        """d k(a, b) / d a, shape (d, n, m)."""
        ls = np.asarray(self.lengthscales)
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        k = self(a, b)
        diff = a[:, None, :] - b[None, :, :]
        return np.moveaxis(-diff / ls**2, 2, 0) * k[None]

    def derivative_prior_variance(self) -> np.ndarray:
        """d^2 k(a, b) / (d a_i d b_i) at a == b, one entry per dimension."""
        return self.signal_variance / np.asarray(self.lengthscales) ** 2


class GpModel:
    """Zero-mean GP posterior with a cached, incrementally grown Cholesky factor.

    Parameters
    ----------
    kernel : SquaredExponential
    noise_variance : float
        Observation noise variance added to the diagonal of the Gram matrix.
    bounds : array_like, optional
        ``(lower, upper)`` corners of the axis-aligned domain. Queries and
        samples outside it raise :class:`DomainError`.
    """

    def __init__(self, kernel, noise_variance=0.5, bounds=None, points=None, values=None):
        if noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")
        self.kernel = kernel
        self.noise_variance = float(noise_variance)
        self.bounds = None if bounds is None else np.asarray(bounds, dtype=float).reshape(2, -1)
        d = kernel.dim
        self._X = np.empty((0, d))
        self._z = np.empty(0)
        self._L = np.empty((0, 0))
        self._alpha = np.empty(0)
        self.jitter = 0.0
        if points is not None:
            points = np.atleast_2d(np.asarray(points, dtype=float))
            values = np.asarray(values, dtype=float).ravel()
            if len(points) != len(values):
                raise ValueError("points and values must have equal length")
            self._check_inputs(points, values)
            self._X = points.copy()
            self._z = values.copy()
            self._refactor()

    # -- data ---------------------------------------------------------------

    @property
    def points(self) -> np.ndarray:
        return self._X

    @property
    def values(self) -> np.ndarray:
        return self._z

    def __len__(self):
        return len(self._z)

    def copy(self) -> "GpModel":
        other = GpModel.__new__(GpModel)
        other.kernel = self.kernel
        other.noise_variance = self.noise_variance
        other.bounds = self.bounds
        other._X = self._X.copy()
        other._z = self._z.copy()
        other._L = self._L.copy()
        other._alpha = self._alpha.copy()
        other.jitter = self.jitter
        return other

    def _check_inputs(self, X, z=None):
        if X.shape[-1] != self.kernel.dim:
            raise ValueError(f"expected {self.kernel.dim}-d states, got {X.shape[-1]}")
        if z is not None and not np.all(np.isfinite(z)):
            raise ValueError("observations must be finite")
        if not np.all(np.isfinite(X)):
            raise DomainError("states must be finite")
        if self.bounds is not None:
            lo, hi = self.bounds
            if np.any(X < lo - _BOUNDS_TOL) or np.any(X > hi + _BOUNDS_TOL):
                raise DomainError("state outside world bounds")

    def _gram(self):
        K = self.kernel(self._X, self._X)
        K[np.diag_indices_from(K)] += self.noise_variance
        return K

    def _refactor(self):
        K = self._gram()
        jitter = 0.0
        while True:
            try:
                L = linalg.cholesky(K + jitter * np.eye(len(K)), lower=True)
                break
            except linalg.LinAlgError:
                jitter = _JITTER if jitter == 0.0 else jitter * 10.0
                if jitter > 1e-2 * self.kernel.signal_variance:
                    raise
        self.jitter = jitter
        self._L = L
        self._alpha = linalg.cho_solve((L, True), self._z)

    def add_observation(self, x, z) -> "GpModel":
        """Append one sample and extend the Cholesky factor in place."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        z = float(z)
        self._check_inputs(x, np.array([z]))
        n = len(self._z)
        k = self.kernel(self._X, x)[:, 0]
        kxx = self.kernel.signal_variance + self.noise_variance + self.jitter
        if n:
            row = linalg.solve_triangular(self._L, k, lower=True)
        else:
            row = np.empty(0)
        d2 = kxx - row @ row
        self._X = np.vstack([self._X, x])
        self._z = np.append(self._z, z)
        if d2 <= 1e-12 * kxx:
            self._refactor()
            return self
        L = np.zeros((n + 1, n + 1))
        L[:n, :n] = self._L
        L[n, :n] = row
        L[n, n] = np.sqrt(d2)
        self._L = L
        self._alpha = linalg.cho_solve((L, True), self._z)
        return self

    # -- queries ------------------------------------------------------------

    def _as_queries(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        self._check_inputs(X)
        return X, single

    def posterior(self, x) -> GaussianBelief:
        """Posterior belief at one state ``(d,)`` or a batch ``(m, d)``."""
        X, single = self._as_queries(x)
        prior = self.kernel.diag(X)
        if len(self._z) == 0:
            mean = np.zeros(len(X))
            var = prior
        else:
            Ks = self.kernel(self._X, X)
            mean = Ks.T @ self._alpha
            v = linalg.solve_triangular(self._L, Ks, lower=True)
            var = np.clip(prior - np.sum(v * v, axis=0), 0.0, prior)
        if single:
            return GaussianBelief(float(mean[0]), float(var[0]))
        return GaussianBelief(mean, var)

    def posterior_derivative(self, x) -> GaussianBelief:
        """Belief over the spatial gradient of the field.

        Returns per-dimension mean and marginal variance; for a single query
        both have shape ``(d,)``, for a batch ``(m, d)``.
        """
        X, single = self._as_queries(x)
        prior = np.broadcast_to(self.kernel.derivative_prior_variance(), X.shape)
        if len(self._z) == 0:
            mean = np.zeros(X.shape)
            var = prior.copy()
        else:
            # dK[d, q, i] = d k(x_q, x_i) / d x_q[d]
            dK = self.kernel.grad_first(X, self._X)
            mean = (dK @ self._alpha).T
            nd, m, n = dK.shape
            v = linalg.solve_triangular(self._L, dK.reshape(nd * m, n).T, lower=True)
            red = np.sum(v * v, axis=0).reshape(nd, m).T
            var = np.clip(prior - red, 0.0, None)
        if single:
            return GaussianBelief(mean[0], var[0])
        return GaussianBelief(mean, var)

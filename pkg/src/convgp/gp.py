"""Exact Gaussian-process machinery.

Dense Cholesky-based prior sampling, posterior inference and marginal
likelihood for kernels exposing ``variance``, ``gram(points)`` and
``cross(a, b)``.  Both the lag-grid :class:`~convgp.stationary.StationaryKernel`
and the closed-form :class:`RbfKernel` satisfy that protocol.

Exact inference only: memory is O(n^2) and time O(n^3), so point sets
beyond ``MAX_POINTS`` are refused outright.  When a Cholesky fails, a
relative jitter ladder (1e-8, 1e-6, 1e-4 times the prior variance) is
climbed; the applied jitter is reported so callers can record it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

__all__ = ["GPPosterior", "RbfKernel", "NoiseModel", "NumericalError",
           "sample_prior", "posterior", "log_marginal_likelihood", "fit_rbf",
           "MAX_POINTS"]

MAX_POINTS = 20_000
_JITTER_LADDER = (1e-8, 1e-6, 1e-4)


class NumericalError(RuntimeError):
    """Raised when a linear system stays unsolvable after jitter escalation."""


@dataclass(frozen=True)
class NoiseModel:
    """Homoscedastic Gaussian observation noise."""

    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"noise sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class GPPosterior:
    mean: np.ndarray
    variance: np.ndarray
    jitter: float = 0.0  # relative jitter that was needed, 0 if none


@dataclass(frozen=True)
class RbfKernel:
    """Squared-exponential kernel K(r) = variance * exp(-|r|^2 / (2 l^2))."""

    lengthscale: float
    variance: float = 1.0

    def __post_init__(self):
        if self.lengthscale <= 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if self.variance <= 0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    def cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64).T).T
        b = np.atleast_2d(np.asarray(b, dtype=np.float64).T).T
        sq = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
        return self.variance * np.exp(-0.5 * sq / self.lengthscale**2)

    def gram(self, points: np.ndarray) -> np.ndarray:
        return self.cross(points, points)


def _check_points(points) -> int:
    n = len(points)
    if n == 0:
        raise ValueError("point set is empty")
    if n > MAX_POINTS:
        raise ValueError(
            f"{n} points exceeds the exact-inference guard of {MAX_POINTS} "
            "(dense solves are O(n^3))"
        )
    return n


def _chol_with_jitter(gram: np.ndarray, k0: float, context: str):
    """Cholesky of a PSD-up-to-noise matrix, escalating jitter as needed."""
    try:
        return np.linalg.cholesky(gram), 0.0
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(gram.shape[0])
    for jitter in _JITTER_LADDER:
        try:
            return np.linalg.cholesky(gram + jitter * k0 * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"Cholesky failed for {context} even with jitter {_JITTER_LADDER[-1]:g}*K(0)"
    )


def sample_prior(
    kernel, points, rng: np.random.Generator, n: int = 1
) -> np.ndarray:
    """Draw ``n`` joint samples of the prior at ``points`` (rows are samples)."""
    m = _check_points(points)
    if n < 0:
        raise ValueError(f"sample count must be non-negative, got {n}")
    if n == 0:
        return np.empty((0, m))
    gram = kernel.gram(points)
    chol, _ = _chol_with_jitter(gram, float(kernel.variance), repr(kernel))
    return rng.standard_normal((n, m)) @ chol.T


def posterior(
    kernel,
    obs_points,
    obs_values: np.ndarray,
    noise: NoiseModel,
    query_points,
) -> GPPosterior:
    """Exact posterior mean and variance at the query points.

    mean = K*^T (K + sigma_n^2 I)^{-1} y, variance = K(0) - diag of the
    corresponding quadratic form, all via one Cholesky factorisation.
    A jitter floor stands in for sigma_n = 0 so interpolation stays
    well-posed.
    """
    n = _check_points(obs_points)
    _check_points(query_points)
    y = np.asarray(obs_values, dtype=np.float64).reshape(-1)
    if y.shape[0] != n:
        raise ValueError(f"{n} points but {y.shape[0]} observed values")
    if not np.all(np.isfinite(y)):
        raise ValueError("observed values must be finite")
    k0 = float(kernel.variance)
    gram = kernel.gram(obs_points) + noise.sigma**2 * np.eye(n)
    if noise.sigma == 0.0:
        gram += 1e-8 * k0 * np.eye(n)
    chol, jitter = _chol_with_jitter(gram, k0, repr(kernel))
    cross = kernel.cross(obs_points, query_points)  # (n_obs, n_query)
    alpha = cho_solve((chol, True), y)
    mean = cross.T @ alpha
    v = solve_triangular(chol, cross, lower=True)
    var = k0 - np.sum(v * v, axis=0)
    var = np.clip(var, 0.0, None)
    return GPPosterior(mean=mean, variance=var, jitter=jitter)


def log_marginal_likelihood(
    kernel, obs_points, obs_values: np.ndarray, noise: NoiseModel
) -> float:
    """Gaussian log evidence of the observations under the kernel + noise."""
    n = _check_points(obs_points)
    y = np.asarray(obs_values, dtype=np.float64).reshape(-1)
    if y.shape[0] != n:
        raise ValueError(f"{n} points but {y.shape[0]} observed values")
    k0 = float(kernel.variance)
    gram = kernel.gram(obs_points) + noise.sigma**2 * np.eye(n)
    if noise.sigma == 0.0:
        gram += 1e-8 * k0 * np.eye(n)
    chol, _ = _chol_with_jitter(gram, k0, repr(kernel))
    alpha = cho_solve((chol, True), y)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return float(-0.5 * y @ alpha - 0.5 * logdet - 0.5 * n * np.log(2.0 * np.pi))


def fit_rbf(
    obs_points,
    obs_values: np.ndarray,
    noise: NoiseModel,
    lengthscales,
) -> RbfKernel:
    """Grid-search the RBF length scale by marginal likelihood.

    The kernel variance is pinned to the sample variance of the
    observations; ties prefer the smaller length scale.
    """
    grid = sorted(float(l) for l in lengthscales)
    if not grid:
        raise ValueError("length-scale grid is empty")
    y = np.asarray(obs_values, dtype=np.float64).reshape(-1)
    s2 = float(np.var(y, ddof=1)) if y.size > 1 else 1.0
    if not np.isfinite(s2) or s2 <= 0:
        s2 = 1.0
    best: tuple[float, RbfKernel] | None = None
    for ell in grid:
        kern = RbfKernel(lengthscale=ell, variance=s2)
        try:
            lml = log_marginal_likelihood(kern, obs_points, y, noise)
        except NumericalError:
            continue
        if not np.isfinite(lml):
            continue
        if best is None or lml > best[0]:
            best = (lml, kern)
    if best is None:
        raise NumericalError("marginal likelihood non-finite on the whole grid")
    return best[1]

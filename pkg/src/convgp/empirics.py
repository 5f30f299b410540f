"""Monte Carlo validation of the analytic kernels.

Many independent networks are sampled (fresh weights and inputs per
sample), each is run forward under circular padding, and the spatial
autocovariance of one output channel is estimated by averaging over
both samples and positions.  Circular padding makes the output exactly
stationary on the finite grid, which is what licenses the position
average; it is enforced here regardless of what padding a
reconstruction run would use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netspec import NetworkSpec
from .network import forward, init_from_rng
from .stationary import StationaryKernel

__all__ = ["CovarianceEstimate", "sample_output", "estimate_covariance", "compare",
           "CompareReport"]


@dataclass(frozen=True)
class CovarianceEstimate:
    dims: int
    half_width: int
    values: np.ndarray  # mean of per-sample circular autocovariances
    stderr: np.ndarray  # per-lag standard error across samples
    n_samples: int

    @property
    def variance(self) -> float:
        return float(self.values[(self.half_width,) * self.dims])

    def rho(self) -> np.ndarray:
        return self.values / self.variance

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.half_width, self.half_width + 1)


def sample_output(spec: NetworkSpec, rng: np.random.Generator, shape) -> np.ndarray:
    """One output-channel realisation of a freshly sampled random network."""
    if isinstance(shape, int):
        shape = (shape,)
    params, net_input = init_from_rng(spec, rng, shape)
    out = forward(spec, params, net_input.x, padding="circular")
    return out[0]


def _circular_autocov(z: np.ndarray) -> np.ndarray:
    """Position-averaged circular autocovariance of one realisation."""
    if z.ndim == 1:
        f = np.fft.rfft(z)
        return np.fft.irfft(f * np.conj(f), n=z.shape[0]).real / z.shape[0]
    f = np.fft.rfft2(z)
    n = z.shape[0] * z.shape[1]
    return np.fft.irfft2(f * np.conj(f), s=z.shape).real / n


def _extract_lags(acov: np.ndarray, half_width: int) -> np.ndarray:
    """Window the circular autocovariance to lags -L..L (wrapping indices)."""
    lags = np.arange(-half_width, half_width + 1)
    if acov.ndim == 1:
        return acov[lags % acov.shape[0]]
    iy = lags[:, None] % acov.shape[0]
    ix = lags[None, :] % acov.shape[1]
    return acov[iy, ix]


def estimate_covariance(
    spec: NetworkSpec,
    n_samples: int,
    shape,
    rng: np.random.Generator,
    half_width: int = 64,
) -> CovarianceEstimate:
    """Estimate the output covariance over ``n_samples`` random networks.

    Each sample consumes its own generator spawned from ``rng``, so the
    estimate is reproducible regardless of how samples are scheduled.
    """
    if isinstance(shape, int):
        shape = (shape,)
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    scale = spec.out_scale
    out_shape = tuple(int(ext * scale) for ext in shape)
    if any(ext * scale != oext for ext, oext in zip(shape, out_shape)):
        raise ValueError(f"shape {shape} incompatible with net resampling {scale}")
    min_ext = min(out_shape)
    if min_ext < 4 * half_width:
        raise ValueError(
            f"output extent {min_ext} too small for half_width {half_width} "
            f"(need >= {4 * half_width})"
        )
    dims = len(shape)
    streams = rng.spawn(n_samples)
    per_sample = np.empty((n_samples,) + (2 * half_width + 1,) * dims)
    for s in range(n_samples):
        z = sample_output(spec, streams[s], shape)
        per_sample[s] = _extract_lags(_circular_autocov(z), half_width)
    values = per_sample.mean(axis=0)
    stderr = per_sample.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return CovarianceEstimate(dims, half_width, values, stderr, n_samples)


@dataclass(frozen=True)
class CompareReport:
    max_abs_rho_err: float
    max_lag_checked: int
    rows: list  # (lag, rho_analytic, rho_empirical, stderr_rho)

    def to_json_dict(self) -> dict:
        return {
            "max_abs_rho_err": self.max_abs_rho_err,
            "max_lag_checked": self.max_lag_checked,
            "per_lag": [
                {"lag": lag, "rho": r, "rho_hat": rh, "stderr": se}
                for lag, r, rh, se in self.rows
            ],
        }


def compare(
    analytic: StationaryKernel,
    empirical: CovarianceEstimate,
    max_lag: int | None = None,
) -> CompareReport:
    """Max normalised-covariance error over lags |r| <= max_lag."""
    if analytic.dims != empirical.dims:
        raise ValueError(
            f"grid mismatch: analytic is {analytic.dims}D, empirical {empirical.dims}D"
        )
    limit = min(analytic.half_width, empirical.half_width)
    if max_lag is None:
        max_lag = limit
    if max_lag > limit:
        raise ValueError(f"max_lag {max_lag} exceeds common support {limit}")
    rho_a = analytic.rho()
    rho_e = empirical.rho()
    se = empirical.stderr / empirical.variance
    rows = []
    if analytic.dims == 1:
        for r in range(-max_lag, max_lag + 1):
            rows.append(
                (
                    r,
                    float(rho_a[analytic.half_width + r]),
                    float(rho_e[empirical.half_width + r]),
                    float(se[empirical.half_width + r]),
                )
            )
    else:
        for ry in range(-max_lag, max_lag + 1):
            for rx in range(-max_lag, max_lag + 1):
                rows.append(
                    (
                        (ry, rx),
                        float(rho_a[analytic.half_width + ry, analytic.half_width + rx]),
                        float(rho_e[empirical.half_width + ry, empirical.half_width + rx]),
                        float(se[empirical.half_width + ry, empirical.half_width + rx]),
                    )
                )
    max_err = max(abs(r - rh) for _, r, rh, _ in rows)
    return CompareReport(max_err, max_lag, rows)

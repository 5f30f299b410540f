"""Layer-by-layer transfer of stationary covariance functions.

In the many-channel limit, each network layer maps the covariance of its
input process to the covariance of its output process:

* a random-i.i.d.-weight conv scales the covariance uniformly by its
  gain and leaves the normalised covariance untouched, independent of
  filter width;
* an erf nonlinearity maps ``K -> (2/pi) arcsin(K(r)/K(0))``;
* a relu nonlinearity maps ``K -> (K(0)/2pi) (sin t + (pi - t) cos t)``
  with ``t = arccos(K(r)/K(0))``;
* a bias adds ``sigma_b^2`` at every lag;
* decimation reads ``K(tau r)``; average pooling first smooths K with
  the triangular autocorrelation of the box filter; upsampling reads
  ``K(r/tau)``, with fractional lags filled by cubic interpolation;
* added streams add their covariances, concatenated streams mix them
  weighted by channel count.

:func:`derive_kernel` folds a :class:`~convgp.netspec.NetworkSpec`
through these rules and can record the kernel after every layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .netspec import Act, Bias, Conv, Down, InputSpec, NetworkSpec, Skip, Up
from .stationary import StationaryKernel

__all__ = [
    "white_kernel",
    "gaussian_filter_taps",
    "gaussian_filtered_kernel",
    "input_kernel",
    "transfer_conv",
    "transfer_nonlinearity",
    "transfer_bias",
    "transfer_resample",
    "transfer_skip",
    "derive_kernel",
    "KernelTrace",
]


def white_kernel(sigma: float, dims: int = 1, half_width: int = 64) -> StationaryKernel:
    """Covariance of i.i.d. N(0, sigma^2) noise: K(0)=sigma^2, else 0."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    n = 2 * half_width + 1
    vals = np.zeros((n,) * dims)
    vals[(half_width,) * dims] = sigma**2
    return StationaryKernel(dims, half_width, vals)


def gaussian_filter_taps(std: float) -> np.ndarray:
    """Normalised discrete Gaussian taps (odd length, unit sum).

    The tap radius is ``ceil(8 * std)`` so the truncated mass is far
    below the tolerances used anywhere downstream.
    """
    if std <= 0:
        raise ValueError(f"filter std must be positive, got {std}")
    radius = max(1, math.ceil(8.0 * std))
    i = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (i / std) ** 2)
    return g / g.sum()


def gaussian_filtered_kernel(
    sigma_noise: float, filter_std: float, dims: int = 1, half_width: int = 64
) -> StationaryKernel:
    """Covariance of white noise filtered by a discrete Gaussian.

    ``K(r) = sigma_noise^2 * (g * g)(r)`` where ``g`` are the normalised
    taps of :func:`gaussian_filter_taps` and ``*`` is discrete
    autocorrelation (separable per axis in 2D).
    """
    if sigma_noise <= 0:
        raise ValueError(f"sigma_noise must be positive, got {sigma_noise}")
    if half_width < 6 * filter_std:
        raise ValueError(
            f"half_width {half_width} too small to hold 6*std support "
            f"(std={filter_std})"
        )
    g = gaussian_filter_taps(filter_std)
    auto_full = np.correlate(g, g, mode="full")  # lags -(len-1) .. len-1
    mid = len(g) - 1
    axis = np.zeros(2 * half_width + 1)
    for r in range(-half_width, half_width + 1):
        if abs(r) <= mid:
            axis[r + half_width] = auto_full[mid + r]
    if dims == 1:
        vals = sigma_noise**2 * axis
    else:
        # separable filter: 2D autocorrelation is the outer product
        vals = sigma_noise**2 * np.outer(axis, axis)
    return StationaryKernel(dims, half_width, vals)


def input_kernel(
    spec: InputSpec, dims: int = 1, half_width: int = 64
) -> StationaryKernel:
    """Kernel of the input process described by an :class:`InputSpec`."""
    if spec.kind == "white":
        return white_kernel(spec.sigma, dims, half_width)
    k = gaussian_filtered_kernel(spec.sigma, spec.filter_std, dims, half_width)
    if spec.white_std > 0:
        vals = k.values.copy()
        vals[(half_width,) * dims] += spec.white_std**2
        k = StationaryKernel(dims, half_width, vals)
    return k


def transfer_conv(k: StationaryKernel, gain: float = 1.0) -> StationaryKernel:
    """Conv layer: uniform scaling by ``gain``; normalised covariance unchanged."""
    if gain <= 0:
        raise ValueError(f"gain must be positive, got {gain}")
    return k.with_values(gain * k.values)


def transfer_nonlinearity(k: StationaryKernel, kind: str) -> StationaryKernel:
    """Nonlinearity transfer in the many-channel limit.

    erf:  K'(r) = (2/pi) arcsin(rho), so K'(0) = 1.
    relu: K'(r) = (K(0)/2pi) (sin t + (pi - t) cos t), t = arccos(rho),
          so K'(0) = K(0)/2.
    """
    if not np.all(np.isfinite(k.values)):
        raise ValueError("kernel values must be finite")
    rho = np.clip(k.rho(), -1.0, 1.0)
    if kind == "erf":
        vals = (2.0 / np.pi) * np.arcsin(rho)
    elif kind == "relu":
        theta = np.arccos(rho)
        vals = (k.variance / (2.0 * np.pi)) * (
            np.sin(theta) + (np.pi - theta) * np.cos(theta)
        )
    else:
        raise ValueError(f"kind must be erf|relu, got {kind!r}")
    return k.with_values(vals)


def transfer_bias(k: StationaryKernel, sigma_b: float) -> StationaryKernel:
    """Additive zero-mean bias: K'(r) = K(r) + sigma_b^2 at every lag."""
    if sigma_b < 0:
        raise ValueError(f"sigma_b must be non-negative, got {sigma_b}")
    return k.with_values(k.values + sigma_b**2)


def _box_autocorr(tau: int) -> np.ndarray:
    """Autocorrelation of the width-``tau`` box filter: triangular window."""
    m = np.arange(-(tau - 1), tau)
    return (tau - np.abs(m)) / float(tau**2)


def _smooth_with_window(values: np.ndarray, window: np.ndarray, dims: int) -> np.ndarray:
    """Correlate the lag grid with a symmetric window, per axis (shrinks support)."""
    half = (len(window) - 1) // 2
    out = values
    for axis in range(dims):
        out = np.moveaxis(out, axis, -1)
        n = out.shape[-1]
        acc = np.zeros(out.shape[:-1] + (n - 2 * half,))
        for j, wv in enumerate(window):
            acc += wv * out[..., j : j + n - 2 * half]
        out = np.moveaxis(acc, -1, axis)
    return out


def transfer_resample(
    k: StationaryKernel, factor: int, direction: str, pool: str = "decimate"
) -> StationaryKernel:
    """Resampling transfer.

    down/decimate reads K(tau r) and shrinks the grid by tau;
    down/avgpool smooths with the box-filter autocorrelation first;
    up reads K(r/tau) on a grid expanded by tau, using cubic
    interpolation at fractional lags (a band-limited read would use a
    sinc; the cubic approximation is flagged in the derivation trace).
    """
    tau = int(factor)
    if tau < 2:
        raise ValueError(f"resampling factor must be >= 2, got {factor}")
    L = k.half_width
    if direction == "down":
        if pool == "decimate":
            new_half = L // tau
            if new_half < 1:
                raise ValueError(
                    f"grid support {L} insufficient for decimation by {tau}"
                )
            idx = L + tau * np.arange(-new_half, new_half + 1)
            vals = k.values[np.ix_(idx, idx)] if k.dims == 2 else k.values[idx]
            return StationaryKernel(k.dims, new_half, vals)
        if pool == "avgpool":
            new_half = (L - (tau - 1)) // tau
            if new_half < 1:
                raise ValueError(
                    f"grid support {L} insufficient for avgpool by {tau}"
                )
            smoothed = _smooth_with_window(k.values, _box_autocorr(tau), k.dims)
            # smoothed grid spans lags -(L-tau+1) .. L-tau+1
            half_s = L - (tau - 1)
            idx = half_s + tau * np.arange(-new_half, new_half + 1)
            vals = smoothed[np.ix_(idx, idx)] if k.dims == 2 else smoothed[idx]
            return StationaryKernel(k.dims, new_half, vals)
        raise ValueError(f"pool must be decimate|avgpool, got {pool!r}")
    if direction != "up":
        raise ValueError(f"direction must be down|up, got {direction!r}")
    new_half = L * tau
    lags_in = np.arange(-L, L + 1, dtype=np.float64)
    lags_out = np.arange(-new_half, new_half + 1, dtype=np.float64) / tau
    if k.dims == 1:
        vals = CubicSpline(lags_in, k.values)(lags_out)
    else:
        # tensor product of 1D splines: exact at integer-lag nodes
        tmp = CubicSpline(lags_in, k.values, axis=0)(lags_out)
        vals = CubicSpline(lags_in, tmp, axis=1)(lags_out)
    # exact at integer multiples of tau; guard interpolation overshoot
    k0 = k.variance
    vals = np.clip(vals, -k0, k0)
    flipped = vals[(slice(None, None, -1),) * k.dims]
    vals = 0.5 * (vals + flipped)
    return StationaryKernel(k.dims, new_half, vals)


def transfer_skip(
    ka: StationaryKernel,
    kb: StationaryKernel,
    kind: str,
    channels_a: int = 1,
    channels_b: int = 1,
) -> StationaryKernel:
    """Merge transfer for independent streams.

    add: K' = Ka + Kb.  concat: the next i.i.d.-weight conv sees the
    channel-weighted mixture K' = (ca Ka + cb Kb) / (ca + cb).
    """
    if ka.dims != kb.dims or ka.half_width != kb.half_width:
        raise ValueError(
            f"grid mismatch: ({ka.dims}D, L={ka.half_width}) vs "
            f"({kb.dims}D, L={kb.half_width})"
        )
    if kind == "add":
        return ka.with_values(ka.values + kb.values)
    if kind == "concat":
        if channels_a < 1 or channels_b < 1:
            raise ValueError("channel counts must be >= 1")
        w = channels_a + channels_b
        return ka.with_values(
            (channels_a * ka.values + channels_b * kb.values) / w
        )
    raise ValueError(f"kind must be add|concat, got {kind!r}")


@dataclass(frozen=True)
class KernelTrace:
    """Kernel snapshot after one layer of a derivation."""

    index: int  # -1 for the input
    label: str
    kernel: StationaryKernel
    approximate: bool = False  # True when cubic interpolation was involved


def derive_kernel(
    spec: NetworkSpec,
    dims: int = 1,
    half_width: int = 64,
    with_trace: bool = False,
):
    """Fold a network spec into its limiting stationary kernel.

    Returns the kernel, or ``(kernel, [KernelTrace, ...])`` when
    ``with_trace`` is set.  The trace starts with the input kernel.
    """
    k = input_kernel(spec.input, dims, half_width)
    trace = [KernelTrace(-1, f"input[{spec.input.kind}]", k)]
    saved: list[StationaryKernel] = []  # kernel after each layer
    approx = False
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv):
            k = transfer_conv(k, spec.conv_gain(i))
            label = f"conv[{layer.channels}x{layer.width}]"
        elif isinstance(layer, Act):
            k = transfer_nonlinearity(k, layer.kind)
            label = f"act[{layer.kind}]"
        elif isinstance(layer, Down):
            k = transfer_resample(k, layer.factor, "down", layer.mode)
            label = f"down[{layer.factor},{layer.mode}]"
        elif isinstance(layer, Up):
            k = transfer_resample(k, layer.factor, "up")
            approx = True
            label = f"up[{layer.factor}]"
        elif isinstance(layer, Bias):
            k = transfer_bias(k, layer.sigma)
            label = f"bias[{layer.sigma}]"
        elif isinstance(layer, Skip):
            src = trace[0].kernel if layer.source == -1 else saved[layer.source]
            # resampling with odd grid widths can leave the two branches on
            # slightly different supports; merge on the common restriction
            common = min(k.half_width, src.half_width)
            k = transfer_skip(
                k.cropped(common),
                src.cropped(common),
                layer.mode,
                channels_a=spec.channels_after(i - 1),
                channels_b=spec.channels_after(layer.source),
            )
            label = f"skip[{layer.mode},{layer.source}]"
        else:  # pragma: no cover - netspec validation rejects these
            raise TypeError(f"unknown layer type {type(layer).__name__}")
        saved.append(k)
        trace.append(KernelTrace(i, label, k, approximate=approx))
    if with_trace:
        return k, trace
    return k

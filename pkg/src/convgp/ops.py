"""Differentiable tensor primitives.

Tensors are plain float64 numpy arrays with a leading channel axis:
``(c, T)`` for 1D signals, ``(c, H, W)`` for 2D images.  Every primitive
is a pure function, and every differentiable primitive comes with its
exact adjoint, so finite-difference and inner-product probes agree to
numerical precision.

Convolution is cross-correlation (no filter flip): tap ``j`` of an
odd-width-``d`` filter reads input offset ``j - d//2``.  The orientation
is locked by golden tests.  ``circular`` padding wraps indices and makes
the op exactly shift equivariant; ``reflect`` mirrors the boundary
without repeating the edge sample.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

from . import backend

PADDINGS = ("circular", "reflect")
ACTIVATIONS = ("erf", "relu")

_ERF_GRAD_COEF = 2.0 / np.sqrt(np.pi)


def gaussian_tensor(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    """i.i.d. draws from N(0, sigma^2) with the given shape."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0 or any(s <= 0 for s in shape):
        raise ValueError(f"shape must have positive extents, got {shape}")
    return sigma * rng.standard_normal(shape)


def _as_f64(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def _check_conv_args(x: np.ndarray, filters: np.ndarray, padding: str) -> int:
    if padding not in PADDINGS:
        raise ValueError(f"padding must be one of {PADDINGS}, got {padding!r}")
    ndim = x.ndim - 1
    if ndim not in (1, 2):
        raise ValueError(f"input must be (c, T) or (c, H, W), got shape {x.shape}")
    if filters.ndim != ndim + 2:
        raise ValueError(
            f"filters must be (f, c, ...) with {ndim} spatial dims, got {filters.shape}"
        )
    if filters.shape[1] != x.shape[0]:
        raise ValueError(
            f"channel mismatch: input has {x.shape[0]}, filters expect {filters.shape[1]}"
        )
    for d in filters.shape[2:]:
        if d % 2 == 0:
            raise ValueError(f"filter width must be odd, got {filters.shape[2:]}")
    for ext, d in zip(x.shape[1:], filters.shape[2:]):
        if ext <= d // 2:
            raise ValueError(
                f"spatial extent {ext} too small for filter width {d}"
            )
    return ndim


def _pad_axis(x: np.ndarray, h: int, axis: int, padding: str) -> np.ndarray:
    x = np.moveaxis(x, axis, -1)
    t = x.shape[-1]
    out = np.empty(x.shape[:-1] + (t + 2 * h,))
    out[..., h : h + t] = x
    if padding == "circular":
        out[..., :h] = x[..., t - h :]
        out[..., h + t :] = x[..., :h]
    else:
        out[..., :h] = np.flip(x[..., 1 : h + 1], -1)
        out[..., h + t :] = np.flip(x[..., t - 1 - h : t - 1], -1)
    return np.moveaxis(out, -1, axis)


def _pad(x: np.ndarray, halves, padding: str) -> np.ndarray:
    # axes padded in order; _fold undoes them in reverse
    out = x
    for axis, h in enumerate(halves, start=1):
        if h > 0:
            out = _pad_axis(out, h, axis, padding)
    return out


def _fold_axis(g: np.ndarray, h: int, axis: int, padding: str) -> np.ndarray:
    """Adjoint of padding one axis by ``h`` on both sides."""
    if h == 0:
        return g
    g = np.moveaxis(g, axis, 0)
    core = g[h:-h].copy()
    left, right = g[:h], g[-h:]
    if padding == "circular":
        core[-h:] += left
        core[:h] += right
    else:
        core[1 : h + 1] += left[::-1]
        core[-h - 1 : -1] += right[::-1]
    return np.moveaxis(core, 0, axis)


def _fold(gpad: np.ndarray, halves, padding: str) -> np.ndarray:
    # np.pad pads axes in order, so the adjoint folds them in reverse
    g = gpad
    for axis in reversed(range(1, 1 + len(halves))):
        g = _fold_axis(g, halves[axis - 1], axis, padding)
    return g


def conv(x: np.ndarray, filters: np.ndarray, padding: str = "circular") -> np.ndarray:
    """Same-size cross-correlation of ``x`` with a filter bank.

    Output ``y[o] = sum_i filters[o, i] corr x[i]`` under the chosen
    boundary rule; linear in both arguments.
    """
    x, filters = _as_f64(x), _as_f64(filters)
    ndim = _check_conv_args(x, filters, padding)
    halves = [d // 2 for d in filters.shape[2:]]
    xpad = _as_f64(_pad(x, halves, padding))
    if ndim == 1:
        return backend.corr1d(xpad, filters)
    return backend.corr2d(xpad, filters)


def conv_grad(
    x: np.ndarray,
    filters: np.ndarray,
    upstream: np.ndarray,
    padding: str = "circular",
    need_input_grad: bool = True,
) -> tuple[np.ndarray | None, np.ndarray]:
    """Reverse-mode gradients of ``conv`` contracted with ``upstream``.

    Returns ``(grad_x, grad_filters)``; ``grad_x`` is ``None`` when not
    requested (skipping it saves the most expensive half of the pass).
    """
    x, filters = _as_f64(x), _as_f64(filters)
    upstream = _as_f64(upstream)
    ndim = _check_conv_args(x, filters, padding)
    expected = (filters.shape[0],) + x.shape[1:]
    if upstream.shape != expected:
        raise ValueError(
            f"upstream shape {upstream.shape} does not match conv output {expected}"
        )
    halves = [d // 2 for d in filters.shape[2:]]
    xpad = _as_f64(_pad(x, halves, padding))
    if ndim == 1:
        gw = backend.corr1d_grad_w(xpad, upstream, filters.shape[2])
    else:
        gw = backend.corr2d_grad_w(xpad, upstream, filters.shape[2], filters.shape[3])
    if not need_input_grad:
        return None, gw
    if ndim == 1:
        gxpad = backend.corr1d_grad_x(filters, upstream)
    else:
        gxpad = backend.corr2d_grad_x(filters, upstream)
    return _fold(gxpad, halves, padding), gw


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    """Elementwise transfer function, ``erf`` or ``relu``."""
    if kind == "erf":
        return _erf(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    raise ValueError(f"kind must be one of {ACTIVATIONS}, got {kind!r}")


def activation_grad(x: np.ndarray, upstream: np.ndarray, kind: str) -> np.ndarray:
    """Gradient of ``activation`` at ``x`` contracted with ``upstream``."""
    if x.shape != upstream.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {upstream.shape}")
    if kind == "erf":
        return upstream * (_ERF_GRAD_COEF * np.exp(-np.square(x)))
    if kind == "relu":
        return upstream * (x > 0)
    raise ValueError(f"kind must be one of {ACTIVATIONS}, got {kind!r}")


def _check_resample(x, factor, direction, mode):
    if x.ndim - 1 not in (1, 2):
        raise ValueError(f"input must be (c, T) or (c, H, W), got shape {x.shape}")
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    if direction == "down":
        if mode not in ("decimate", "avgpool"):
            raise ValueError(f"down modes are decimate|avgpool, got {mode!r}")
        for ext in x.shape[1:]:
            if ext % factor != 0:
                raise ValueError(
                    f"extent {ext} not divisible by downsampling factor {factor}"
                )
    elif direction == "up":
        if mode not in ("nearest", "bilinear"):
            raise ValueError(f"up modes are nearest|bilinear, got {mode!r}")
    else:
        raise ValueError(f"direction must be down|up, got {direction!r}")


def _up_linear_axis(x: np.ndarray, tau: int, axis: int) -> np.ndarray:
    """Linear interpolation by ``tau`` along one axis.

    Output position ``t`` reads input position ``t / tau``; the upper
    interpolation neighbour wraps circularly so a stationary input stays
    stationary.
    """
    x = np.moveaxis(x, axis, -1)
    out_shape = x.shape[:-1] + (x.shape[-1] * tau,)
    y = np.empty(out_shape)
    nxt = np.roll(x, -1, axis=-1)
    for s in range(tau):
        f = s / tau
        y[..., s::tau] = (1.0 - f) * x + f * nxt
    return np.moveaxis(y, -1, axis)


def _up_linear_axis_grad(g: np.ndarray, tau: int, axis: int) -> np.ndarray:
    g = np.moveaxis(g, axis, -1)
    t_in = g.shape[-1] // tau
    gx = np.zeros(g.shape[:-1] + (t_in,))
    for s in range(tau):
        f = s / tau
        phase = g[..., s::tau]
        gx += (1.0 - f) * phase
        gx += np.roll(f * phase, 1, axis=-1)
    return np.moveaxis(gx, -1, axis)


def resample(x: np.ndarray, factor: int, direction: str, mode: str) -> np.ndarray:
    """Integer-factor down/up-sampling along every spatial axis.

    ``down/decimate`` keeps every ``factor``-th sample, ``down/avgpool``
    averages non-overlapping blocks, ``up/nearest`` repeats samples and
    ``up/bilinear`` interpolates linearly (circular wrap at the end).
    """
    _check_resample(x, factor, direction, mode)
    x = np.asarray(x, dtype=np.float64)
    tau = int(factor)
    if tau == 1:
        return x.copy()
    ndim = x.ndim - 1
    if direction == "down":
        if mode == "decimate":
            sl = (slice(None),) + (slice(None, None, tau),) * ndim
            return x[sl].copy()
        if ndim == 1:
            c, t = x.shape
            return x.reshape(c, t // tau, tau).mean(axis=2)
        c, h, w = x.shape
        return x.reshape(c, h // tau, tau, w // tau, tau).mean(axis=(2, 4))
    if mode == "nearest":
        y = x
        for axis in range(1, ndim + 1):
            y = np.repeat(y, tau, axis=axis)
        return y
    y = x
    for axis in range(1, ndim + 1):
        y = _up_linear_axis(y, tau, axis)
    return y


def resample_grad(
    x_shape: tuple, factor: int, direction: str, mode: str, upstream: np.ndarray
) -> np.ndarray:
    """Exact adjoint of :func:`resample` applied to ``upstream``."""
    tau = int(factor)
    ndim = len(x_shape) - 1
    g = np.asarray(upstream, dtype=np.float64)
    if tau == 1:
        return g.copy()
    if direction == "down":
        if mode == "decimate":
            gx = np.zeros(x_shape)
            sl = (slice(None),) + (slice(None, None, tau),) * ndim
            gx[sl] = g
            return gx
        y = g / float(tau**ndim)
        for axis in range(1, ndim + 1):
            y = np.repeat(y, tau, axis=axis)
        return y
    if mode == "nearest":
        for axis in range(1, ndim + 1):
            s = list(g.shape)
            s[axis] //= tau
            s.insert(axis + 1, tau)
            g = g.reshape(s).sum(axis=axis + 1)
        return g
    for axis in reversed(range(1, ndim + 1)):
        g = _up_linear_axis_grad(g, tau, axis)
    return g


def merge(a: np.ndarray, b: np.ndarray, kind: str) -> np.ndarray:
    """Combine two tensors: elementwise ``add`` or channel ``concat``."""
    if kind == "add":
        if a.shape != b.shape:
            raise ValueError(f"add requires identical shapes, got {a.shape} vs {b.shape}")
        return a + b
    if kind == "concat":
        if a.shape[1:] != b.shape[1:]:
            raise ValueError(
                f"concat requires identical spatial extents, got {a.shape} vs {b.shape}"
            )
        return np.concatenate([a, b], axis=0)
    raise ValueError(f"kind must be add|concat, got {kind!r}")


def merge_grad(
    a_channels: int, kind: str, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Adjoint of :func:`merge`; returns ``(grad_a, grad_b)``."""
    if kind == "add":
        return upstream, upstream
    if kind == "concat":
        return upstream[:a_channels], upstream[a_channels:]
    raise ValueError(f"kind must be add|concat, got {kind!r}")

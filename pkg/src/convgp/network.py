"""Trainable realisation of a network spec.

Parameters are sampled layer by layer (conv weights ``N(0, gain/fan_in)``,
biases ``N(0, sigma_b^2)``); the input realisation is drawn from the
spec's input process and frozen by default.  Forward passes hand-chain
the primitives from :mod:`convgp.ops` and cache every layer output so
the backward pass can produce exact gradients, including through skip
connections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .calculus import gaussian_filter_taps
from .netspec import Act, Bias, Conv, Down, NetworkSpec, Skip, Up
from .rng import make_rng

__all__ = ["ParamSet", "NetworkInput", "init", "init_from_rng", "forward",
           "forward_cached", "backward"]


@dataclass
class ParamSet:
    """Per-layer parameter arrays, keyed by layer index."""

    weights: dict[int, np.ndarray]
    seed: int | None = None

    def keys(self) -> list[int]:
        return sorted(self.weights)

    def arrays(self) -> list[np.ndarray]:
        """Arrays in fixed (layer-index) order."""
        return [self.weights[k] for k in self.keys()]

    def copy(self) -> "ParamSet":
        return ParamSet({k: v.copy() for k, v in self.weights.items()}, self.seed)

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(v * v)) for v in self.weights.values())))


@dataclass
class NetworkInput:
    x: np.ndarray
    frozen: bool = True
    perturb_sigma: float = 0.0

    def __post_init__(self):
        if self.perturb_sigma < 0:
            raise ValueError("perturb_sigma must be non-negative")


def _circular_gaussian_filter(x: np.ndarray, std: float) -> np.ndarray:
    """Filter each channel with normalised Gaussian taps, wrapping at edges."""
    taps = gaussian_filter_taps(std)
    half = (len(taps) - 1) // 2
    out = x
    for axis in range(1, x.ndim):
        acc = np.zeros_like(out)
        for j, tap in enumerate(taps):
            acc += tap * np.roll(out, half - j, axis=axis)
        out = acc
    return out


def sample_input(spec: NetworkSpec, rng: np.random.Generator, shape) -> np.ndarray:
    """One realisation of the spec's input process, shape (c, *shape)."""
    inp = spec.input
    x = ops.gaussian_tensor(rng, (inp.channels, *shape), inp.sigma)
    if inp.kind == "gaussian_filtered":
        x = _circular_gaussian_filter(x, inp.filter_std)
        if inp.white_std > 0:
            x = x + ops.gaussian_tensor(rng, x.shape, inp.white_std)
    return x


def init_from_rng(
    spec: NetworkSpec, rng: np.random.Generator, shape
) -> tuple[ParamSet, NetworkInput]:
    """Draw parameters and an input realisation from an existing generator."""
    dims = len(shape)
    if dims not in (1, 2):
        raise ValueError(f"shape must be (T,) or (H, W), got {shape}")
    weights: dict[int, np.ndarray] = {}
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv):
            c_in = spec.channels_after(i - 1)
            fan_in = c_in * layer.width**dims
            sigma = np.sqrt(spec.conv_gain(i) / fan_in)
            wshape = (layer.channels, c_in) + (layer.width,) * dims
            weights[i] = ops.gaussian_tensor(rng, wshape, sigma)
        elif isinstance(layer, Bias):
            ch = spec.channels_after(i - 1)
            weights[i] = (
                ops.gaussian_tensor(rng, (ch,), layer.sigma)
                if layer.sigma > 0
                else np.zeros(ch)
            )
    x = sample_input(spec, rng, shape)
    return ParamSet(weights), NetworkInput(x)


def init(spec: NetworkSpec, seed: int, shape) -> tuple[ParamSet, NetworkInput]:
    """Deterministic initialisation: same seed, same parameters and input."""
    params, net_input = init_from_rng(spec, make_rng(seed), shape)
    params.seed = seed
    return params, net_input


def _bias_view(b: np.ndarray, ndim: int) -> np.ndarray:
    return b.reshape((-1,) + (1,) * (ndim - 1))


def forward_cached(
    spec: NetworkSpec, params: ParamSet, x: np.ndarray, padding: str = "circular"
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Run the network; returns the output and all layer activations.

    ``cache[0]`` is the input, ``cache[i + 1]`` the output of layer ``i``.
    """
    if x.shape[0] != spec.input.channels:
        raise ValueError(
            f"input has {x.shape[0]} channels, spec expects {spec.input.channels}"
        )
    acts = [np.asarray(x, dtype=np.float64)]
    for i, layer in enumerate(spec.layers):
        cur = acts[-1]
        try:
            if isinstance(layer, Conv):
                out = ops.conv(cur, params.weights[i], padding)
            elif isinstance(layer, Act):
                out = ops.activation(cur, layer.kind)
            elif isinstance(layer, Down):
                out = ops.resample(cur, layer.factor, "down", layer.mode)
            elif isinstance(layer, Up):
                out = ops.resample(cur, layer.factor, "up", layer.mode)
            elif isinstance(layer, Bias):
                out = cur + _bias_view(params.weights[i], cur.ndim)
            elif isinstance(layer, Skip):
                out = ops.merge(cur, acts[layer.source + 1], layer.mode)
            else:  # pragma: no cover
                raise TypeError(f"unknown layer type {type(layer).__name__}")
        except ValueError as e:
            raise ValueError(f"layer {i} ({type(layer).__name__.lower()}): {e}") from e
        acts.append(out)
    return acts[-1], acts


def forward(
    spec: NetworkSpec, params: ParamSet, x: np.ndarray, padding: str = "circular"
) -> np.ndarray:
    return forward_cached(spec, params, x, padding)[0]


def backward(
    spec: NetworkSpec,
    params: ParamSet,
    cache: list[np.ndarray],
    out_grad: np.ndarray,
    padding: str = "circular",
    with_input_grad: bool = False,
):
    """Exact reverse-mode gradients through the cached forward pass.

    With ``out_grad = f - y`` this yields the gradients of
    ``0.5 * ||y - f||^2``.  Returns ``(grads, input_grad)`` where
    ``grads`` maps layer index to the gradient of that layer's
    parameters and ``input_grad`` is ``None`` unless requested.
    """
    if len(cache) != len(spec.layers) + 1:
        raise ValueError("forward cache missing or inconsistent with the spec")
    if out_grad.shape != cache[-1].shape:
        raise ValueError(
            f"out_grad shape {out_grad.shape} does not match output {cache[-1].shape}"
        )
    slot_grads: list[np.ndarray | None] = [None] * len(cache)
    slot_grads[-1] = np.asarray(out_grad, dtype=np.float64)
    param_grads: dict[int, np.ndarray] = {}

    def _add(slot: int, g: np.ndarray) -> None:
        if slot_grads[slot] is None:
            slot_grads[slot] = g
        else:
            slot_grads[slot] = slot_grads[slot] + g

    for i in reversed(range(len(spec.layers))):
        g = slot_grads[i + 1]
        if g is None:
            continue
        layer = spec.layers[i]
        cur = cache[i]
        if isinstance(layer, Conv):
            # the gradient w.r.t. the network input is only materialised
            # on request; skipping it halves the first conv's cost
            need_gx = i > 0 or with_input_grad
            gx, gw = ops.conv_grad(
                cur, params.weights[i], g, padding, need_input_grad=need_gx
            )
            param_grads[i] = gw
            if need_gx:
                _add(i, gx)
        elif isinstance(layer, Act):
            _add(i, ops.activation_grad(cur, g, layer.kind))
        elif isinstance(layer, Down):
            _add(i, ops.resample_grad(cur.shape, layer.factor, "down", layer.mode, g))
        elif isinstance(layer, Up):
            _add(i, ops.resample_grad(cur.shape, layer.factor, "up", layer.mode, g))
        elif isinstance(layer, Bias):
            param_grads[i] = g.reshape(g.shape[0], -1).sum(axis=1)
            _add(i, g)
        elif isinstance(layer, Skip):
            ga, gb = ops.merge_grad(cur.shape[0], layer.mode, g)
            _add(i, ga)
            _add(layer.source + 1, gb)
    for i in params.weights:
        if i not in param_grads:
            param_grads[i] = np.zeros_like(params.weights[i])
    input_grad = None
    if with_input_grad:
        input_grad = (
            slot_grads[0]
            if slot_grads[0] is not None
            else np.zeros_like(cache[0])
        )
    return param_grads, input_grad

"""Declarative network descriptions.

A :class:`NetworkSpec` is an ordered list of layers plus an input
descriptor.  The same spec drives three consumers: the kernel calculus
(:mod:`convgp.calculus`), the Monte Carlo validator
(:mod:`convgp.empirics`) and the trainable runtime
(:mod:`convgp.network`).

Skip layers merge the current stream with the output of an earlier
layer (``source`` is a layer index, ``-1`` for the network input).
Spatial bookkeeping is validated: a skip may only merge streams at the
same resolution, and ``add`` merges additionally require equal channel
counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .ops import ACTIVATIONS

__all__ = [
    "Conv",
    "Act",
    "Down",
    "Up",
    "Bias",
    "Skip",
    "InputSpec",
    "NetworkSpec",
]


@dataclass(frozen=True)
class Conv:
    channels: int
    width: int = 3
    gain: float | None = None  # None: 2 when feeding relu, else 1


@dataclass(frozen=True)
class Act:
    kind: str  # "erf" | "relu"


@dataclass(frozen=True)
class Down:
    factor: int
    mode: str = "decimate"  # "decimate" | "avgpool"


@dataclass(frozen=True)
class Up:
    factor: int
    mode: str = "bilinear"  # "nearest" | "bilinear"


@dataclass(frozen=True)
class Bias:
    sigma: float


@dataclass(frozen=True)
class Skip:
    source: int
    mode: str = "concat"  # "add" | "concat"


Layer = Conv | Act | Down | Up | Bias | Skip


@dataclass(frozen=True)
class InputSpec:
    """Input process: i.i.d. channels of white or Gaussian-filtered noise.

    ``white_std`` adds an independent white component on top of a
    filtered one (covariance: filtered autocorrelation plus a nugget),
    which keeps some full-bandwidth content in otherwise smooth inputs.
    """

    channels: int
    kind: str = "white"  # "white" | "gaussian_filtered"
    sigma: float = 1.0
    filter_std: float = 0.0
    white_std: float = 0.0

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError(f"input channels must be >= 1, got {self.channels}")
        if self.kind not in ("white", "gaussian_filtered"):
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.sigma <= 0:
            raise ValueError(f"input sigma must be positive, got {self.sigma}")
        if self.kind == "gaussian_filtered" and self.filter_std <= 0:
            raise ValueError("gaussian_filtered input requires filter_std > 0")
        if self.white_std < 0:
            raise ValueError("white_std must be non-negative")
        if self.kind == "white" and self.white_std > 0:
            raise ValueError("white_std applies to gaussian_filtered inputs only")


@dataclass(frozen=True)
class NetworkSpec:
    input: InputSpec
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        self._validate()

    def _validate(self) -> None:
        channels = [self.input.channels]  # channels after each layer; [0] = input
        scales = [Fraction(1)]  # spatial sampling rate relative to the input
        for i, layer in enumerate(self.layers):
            ch, sc = channels[-1], scales[-1]
            if isinstance(layer, Conv):
                if layer.channels < 1:
                    raise ValueError(f"layer {i}: conv channels must be >= 1")
                if layer.width < 1 or layer.width % 2 == 0:
                    raise ValueError(f"layer {i}: conv width must be odd, got {layer.width}")
                if layer.gain is not None and layer.gain <= 0:
                    raise ValueError(f"layer {i}: conv gain must be positive")
                ch = layer.channels
            elif isinstance(layer, Act):
                if layer.kind not in ACTIVATIONS:
                    raise ValueError(f"layer {i}: unknown activation {layer.kind!r}")
            elif isinstance(layer, Down):
                if layer.factor < 2:
                    raise ValueError(f"layer {i}: resampling factor must be >= 2")
                if layer.mode not in ("decimate", "avgpool"):
                    raise ValueError(f"layer {i}: unknown down mode {layer.mode!r}")
                sc = sc / layer.factor
            elif isinstance(layer, Up):
                if layer.factor < 2:
                    raise ValueError(f"layer {i}: resampling factor must be >= 2")
                if layer.mode not in ("nearest", "bilinear"):
                    raise ValueError(f"layer {i}: unknown up mode {layer.mode!r}")
                sc = sc * layer.factor
            elif isinstance(layer, Bias):
                if layer.sigma < 0:
                    raise ValueError(f"layer {i}: bias sigma must be non-negative")
            elif isinstance(layer, Skip):
                if not -1 <= layer.source < i:
                    raise ValueError(
                        f"layer {i}: skip source {layer.source} must precede the merge"
                    )
                if layer.mode not in ("add", "concat"):
                    raise ValueError(f"layer {i}: unknown skip mode {layer.mode!r}")
                src_ch = channels[layer.source + 1]
                src_sc = scales[layer.source + 1]
                if src_sc != sc:
                    raise ValueError(
                        f"layer {i}: skip merges resolution {sc} with {src_sc}"
                    )
                if layer.mode == "add":
                    if src_ch != ch:
                        raise ValueError(
                            f"layer {i}: add-skip requires equal channels "
                            f"({ch} vs {src_ch})"
                        )
                else:
                    ch = ch + src_ch
            else:
                raise TypeError(f"layer {i}: unknown layer type {type(layer).__name__}")
            channels.append(ch)
            scales.append(sc)
        object.__setattr__(self, "_channels", tuple(channels))
        object.__setattr__(self, "_scales", tuple(scales))

    def channels_after(self, index: int) -> int:
        """Channel count after layer ``index`` (``-1`` for the input)."""
        return self._channels[index + 1]

    def scale_after(self, index: int) -> Fraction:
        """Sampling rate after layer ``index`` relative to the input."""
        return self._scales[index + 1]

    @property
    def out_channels(self) -> int:
        return self._channels[-1]

    @property
    def out_scale(self) -> Fraction:
        return self._scales[-1]

    def conv_gain(self, index: int) -> float:
        """Weight-variance gain of the conv at ``index``.

        Explicit gains win; otherwise 2 when the layer directly feeding
        off this conv is a relu (variance-preserving choice), else 1.
        """
        layer = self.layers[index]
        if not isinstance(layer, Conv):
            raise ValueError(f"layer {index} is not a conv")
        if layer.gain is not None:
            return float(layer.gain)
        if index + 1 < len(self.layers):
            nxt = self.layers[index + 1]
            if isinstance(nxt, Act) and nxt.kind == "relu":
                return 2.0
        return 1.0

    # -- serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            if isinstance(layer, Conv):
                d = {"type": "conv", "channels": layer.channels, "width": layer.width}
                if layer.gain is not None:
                    d["gain"] = layer.gain
            elif isinstance(layer, Act):
                d = {"type": "act", "kind": layer.kind}
            elif isinstance(layer, Down):
                d = {"type": "down", "factor": layer.factor, "mode": layer.mode}
            elif isinstance(layer, Up):
                d = {"type": "up", "factor": layer.factor, "mode": layer.mode}
            elif isinstance(layer, Bias):
                d = {"type": "bias", "sigma": layer.sigma}
            else:
                d = {"type": "skip", "source": layer.source, "mode": layer.mode}
            layers.append(d)
        inp = {"channels": self.input.channels, "kind": self.input.kind,
               "sigma": self.input.sigma}
        if self.input.kind == "gaussian_filtered":
            inp["filter_std"] = self.input.filter_std
            if self.input.white_std > 0:
                inp["white_std"] = self.input.white_std
        return {"input": inp, "layers": layers}

    @classmethod
    def from_json_dict(cls, d: dict) -> "NetworkSpec":
        inp = d["input"]
        input_spec = InputSpec(
            channels=int(inp["channels"]),
            kind=inp.get("kind", "white"),
            sigma=float(inp.get("sigma", 1.0)),
            filter_std=float(inp.get("filter_std", 0.0)),
            white_std=float(inp.get("white_std", 0.0)),
        )
        layers: list[Layer] = []
        for i, ld in enumerate(d["layers"]):
            t = ld.get("type")
            if t == "conv":
                layers.append(
                    Conv(int(ld["channels"]), int(ld.get("width", 3)),
                         float(ld["gain"]) if "gain" in ld else None)
                )
            elif t == "act":
                layers.append(Act(ld["kind"]))
            elif t == "down":
                layers.append(Down(int(ld["factor"]), ld.get("mode", "decimate")))
            elif t == "up":
                layers.append(Up(int(ld["factor"]), ld.get("mode", "bilinear")))
            elif t == "bias":
                layers.append(Bias(float(ld["sigma"])))
            elif t == "skip":
                layers.append(Skip(int(ld["source"]), ld.get("mode", "concat")))
            else:
                raise ValueError(f"layer {i}: unknown layer type {t!r}")
        return cls(input=input_spec, layers=tuple(layers))

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        return cls.from_json_dict(json.loads(text))


def load_spec(path) -> NetworkSpec:
    with open(path) as f:
        return NetworkSpec.from_json(f.read())


def save_spec(spec: NetworkSpec, path) -> None:
    with open(path, "w") as f:
        f.write(spec.to_json() + "\n")

"""Ready-made architecture families.

``conv_<d>``: d blocks of conv + relu at a single resolution.
``ae_<d>``: d conv+downsampling blocks followed by d conv+upsampling
blocks.
``unet_small``: two downsampling and two upsampling stages with
concatenating skip connections.
``dip_paper_scaled``: five-level skip autoencoder in the same spirit at
desk scale; channel count is configurable (64 by default, flags allow
up to 512).  Filter widths and skip wiring here are this package's own
choices.

``out_channels`` appends a width-1 projection conv so the network
renders an image with that many channels; leave it ``None`` for
covariance studies, where a representative channel is enough.
"""

from __future__ import annotations

import re

from .netspec import Act, Conv, Down, InputSpec, NetworkSpec, Skip, Up

__all__ = ["preset", "preset_names", "conv_net", "autoencoder", "unet_small",
           "dip_paper_scaled"]


def _input_spec(channels, input_kind, input_sigma, filter_std, white_std):
    return InputSpec(
        channels=channels, kind=input_kind, sigma=input_sigma,
        filter_std=filter_std, white_std=white_std,
    )


def _project(layers, out_channels):
    if out_channels is not None:
        layers.append(Conv(out_channels, width=1))
    return layers


def conv_net(
    depth: int,
    channels: int = 256,
    width: int = 3,
    in_channels: int | None = None,
    input_kind: str = "white",
    input_sigma: float = 1.0,
    filter_std: float = 0.0,
    white_std: float = 0.0,
    out_channels: int | None = None,
) -> NetworkSpec:
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    layers = []
    for _ in range(depth):
        layers += [Conv(channels, width), Act("relu")]
    return NetworkSpec(
        input=_input_spec(in_channels or channels, input_kind, input_sigma, filter_std, white_std),
        layers=tuple(_project(layers, out_channels)),
    )


def autoencoder(
    depth: int,
    channels: int = 256,
    width: int = 3,
    factor: int = 2,
    in_channels: int | None = None,
    input_kind: str = "white",
    input_sigma: float = 1.0,
    filter_std: float = 0.0,
    white_std: float = 0.0,
    out_channels: int | None = None,
) -> NetworkSpec:
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    layers = []
    for _ in range(depth):
        layers += [Conv(channels, width), Act("relu"), Down(factor)]
    for _ in range(depth):
        layers += [Conv(channels, width), Act("relu"), Up(factor)]
    return NetworkSpec(
        input=_input_spec(in_channels or channels, input_kind, input_sigma, filter_std, white_std),
        layers=tuple(_project(layers, out_channels)),
    )


def unet_small(
    channels: int = 64,
    width: int = 3,
    in_channels: int | None = None,
    input_kind: str = "white",
    input_sigma: float = 1.0,
    filter_std: float = 0.0,
    white_std: float = 0.0,
    out_channels: int | None = None,
) -> NetworkSpec:
    c, w = channels, width
    layers = [
        Conv(c, w), Act("relu"),          # 0,1   full resolution (skip A = 1)
        Down(2),                          # 2
        Conv(c, w), Act("relu"),          # 3,4   half resolution (skip B = 4)
        Down(2),                          # 5
        Conv(c, w), Act("relu"),          # 6,7   quarter resolution
        Up(2),                            # 8
        Skip(source=4, mode="concat"),    # 9
        Conv(c, w), Act("relu"),          # 10,11
        Up(2),                            # 12
        Skip(source=1, mode="concat"),    # 13
        Conv(c, w), Act("relu"),          # 14,15
    ]
    return NetworkSpec(
        input=_input_spec(in_channels or channels, input_kind, input_sigma, filter_std, white_std),
        layers=tuple(_project(layers, out_channels)),
    )


def dip_paper_scaled(
    channels: int = 64,
    width: int = 3,
    levels: int = 5,
    in_channels: int | None = None,
    input_kind: str = "white",
    input_sigma: float = 1.0,
    filter_std: float = 0.0,
    white_std: float = 0.0,
    out_channels: int | None = None,
) -> NetworkSpec:
    c, w = channels, width
    layers: list = []
    skip_sources = []
    for _ in range(levels):
        layers += [Conv(c, w), Act("relu")]
        skip_sources.append(len(layers) - 1)
        layers.append(Down(2))
    layers += [Conv(c, w), Act("relu")]
    for lvl in reversed(range(levels)):
        layers.append(Up(2))
        layers.append(Skip(source=skip_sources[lvl], mode="concat"))
        layers += [Conv(c, w), Act("relu")]
    return NetworkSpec(
        input=_input_spec(in_channels or channels, input_kind, input_sigma, filter_std, white_std),
        layers=tuple(_project(layers, out_channels)),
    )


_DEPTH_RE = re.compile(r"^(conv|ae)_(\d+)$")


def preset_names() -> list[str]:
    return ["conv_<d>", "ae_<d>", "unet_small", "dip_paper_scaled"]


def preset(name: str, **kwargs) -> NetworkSpec:
    """Build a preset by name (e.g. ``conv_2``, ``ae_3``, ``unet_small``)."""
    m = _DEPTH_RE.match(name)
    if m:
        depth = int(m.group(2))
        if m.group(1) == "conv":
            return conv_net(depth, **kwargs)
        return autoencoder(depth, **kwargs)
    if name == "unet_small":
        return unet_small(**kwargs)
    if name == "dip_paper_scaled":
        return dip_paper_scaled(**kwargs)
    raise ValueError(
        f"unknown preset {name!r}; expected one of {preset_names()}"
    )

"""Tiny synthetic grayscale test images.

Deterministic, resolution-parametric scenes used by the test suite and
handy for demo runs.  Values lie in [0, 1] and mix smooth regions with
a few edges, which is what the reconstruction priors are sensitive to.
"""

from __future__ import annotations

import numpy as np

SCENES = ("blobs", "stripes", "rings", "steps")

__all__ = ["SCENES", "synthetic_image"]


def synthetic_image(scene: str, size: int = 64) -> np.ndarray:
    """Return an (size, size) float image in [0, 1]."""
    yy, xx = np.meshgrid(
        np.linspace(-1.0, 1.0, size), np.linspace(-1.0, 1.0, size), indexing="ij"
    )
    if scene == "blobs":
        img = (
            0.55 * np.exp(-((yy + 0.35) ** 2 + (xx + 0.30) ** 2) / 0.08)
            + 0.75 * np.exp(-((yy - 0.30) ** 2 + (xx - 0.25) ** 2) / 0.18)
            + 0.25 * xx
            + 0.35
        )
    elif scene == "stripes":
        img = 0.5 + 0.32 * np.sin(2.0 * np.pi * (1.5 * xx + 0.6 * yy)) + 0.12 * yy
    elif scene == "rings":
        r = np.sqrt(yy**2 + xx**2)
        img = 0.5 + 0.34 * np.cos(2.0 * np.pi * 1.8 * r) * np.exp(-r)
    elif scene == "steps":
        img = 0.2 + 0.3 * (xx > -0.25) + 0.25 * (yy > 0.2) + 0.08 * xx
    else:
        raise ValueError(f"unknown scene {scene!r}; expected one of {SCENES}")
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo) * 0.9 + 0.05

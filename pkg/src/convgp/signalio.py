"""Image and 1D-signal I/O, corruption generators, masks and metrics.

Images travel as netpbm files: PGM (P2/P5) for grayscale, PPM (P3/P6)
for colour, maxval 255 or 65535 (binary 16-bit samples are big-endian).
In memory an :class:`ImageBuffer` holds floats on the [0, 1] scale;
values are clamped only when encoding, so intermediate estimates may
leave the range freely.

Metrics operate on plain arrays of any matching shape, with an optional
boolean mask restricting them to observed entries.  PSNR is reported on
the [0, 1] scale and identical inputs yield ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ImageBuffer",
    "Mask",
    "read_image",
    "write_image",
    "add_noise",
    "random_mask",
    "mse",
    "psnr",
    "read_signal",
    "write_signal",
]


@dataclass
class ImageBuffer:
    """Float image, shape (height, width, channels) with channels 1 or 3."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(
                f"pixels must be (H, W) or (H, W, 1|3), got {self.pixels.shape}"
            )
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def to_tensor(self) -> np.ndarray:
        """(channels, H, W) view for the network/inference layers."""
        return np.ascontiguousarray(self.pixels.transpose(2, 0, 1))

    @classmethod
    def from_tensor(cls, t: np.ndarray) -> "ImageBuffer":
        t = np.asarray(t, dtype=np.float64)
        if t.ndim != 3:
            raise ValueError(f"tensor must be (c, H, W), got {t.shape}")
        return cls(t.transpose(1, 2, 0))


def _read_tokens(data: bytes, count: int, idx: int) -> tuple[list[bytes], int]:
    tokens = []
    size = len(data)
    while len(tokens) < count:
        while idx < size and data[idx : idx + 1].isspace():
            idx += 1
        if idx < size and data[idx] == ord("#"):
            while idx < size and data[idx] not in (10, 13):
                idx += 1
            continue
        start = idx
        while idx < size and not data[idx : idx + 1].isspace():
            idx += 1
        if start == idx:
            raise ValueError("malformed netpbm header")
        tokens.append(data[start:idx])
    return tokens, idx


def read_image(path) -> ImageBuffer:
    """Read a PGM/PPM file (P2, P3, P5 or P6; maxval 255 or 65535)."""
    with open(path, "rb") as f:
        data = f.read()
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ValueError(f"unsupported netpbm magic {magic!r} in {path}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    (w_b, h_b, mv_b), idx = _read_tokens(data, 3, 2)
    width, height, maxval = int(w_b), int(h_b), int(mv_b)
    if maxval not in (255, 65535):
        raise ValueError(f"unsupported maxval {maxval} (expected 255 or 65535)")
    n = width * height * channels
    if magic in (b"P2", b"P3"):
        text = data[idx:].split()
        if len(text) != n:
            raise ValueError(
                f"truncated payload: expected {n} samples, got {len(text)}"
            )
        samples = np.array([int(t) for t in text], dtype=np.float64)
    else:
        idx += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval == 65535 else np.dtype(np.uint8)
        payload = data[idx : idx + n * dtype.itemsize]
        if len(payload) != n * dtype.itemsize:
            raise ValueError(
                f"truncated payload: expected {n * dtype.itemsize} bytes, "
                f"got {len(payload)}"
            )
        samples = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if samples.size and (samples.max() > maxval or samples.min() < 0):
        raise ValueError(f"sample out of range for maxval {maxval}")
    px = samples.reshape(height, width, channels) / maxval
    return ImageBuffer(px)


def write_image(path, img: ImageBuffer, maxval: int = 255, binary: bool = True) -> None:
    """Write PGM/PPM; values are clamped to [0, 1] and quantised here."""
    if maxval not in (255, 65535):
        raise ValueError(f"unsupported maxval {maxval} (expected 255 or 65535)")
    q = np.rint(np.clip(img.pixels, 0.0, 1.0) * maxval).astype(np.int64)
    color = img.channels == 3
    if binary:
        magic = b"P6" if color else b"P5"
        header = b"%s\n%d %d\n%d\n" % (magic, img.width, img.height, maxval)
        dtype = np.dtype(">u2") if maxval == 65535 else np.uint8
        payload = q.astype(dtype).tobytes()
        with open(path, "wb") as f:
            f.write(header + payload)
        return
    magic = "P3" if color else "P2"
    lines = [magic, f"{img.width} {img.height}", str(maxval)]
    flat = q.reshape(-1)
    for start in range(0, flat.size, 12):
        lines.append(" ".join(str(v) for v in flat[start : start + 12]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def add_noise(img: ImageBuffer, sigma: float, rng: np.random.Generator) -> ImageBuffer:
    """Add i.i.d. N(0, sigma^2) per sample (sigma on the [0, 1] scale); unclamped."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return ImageBuffer(img.pixels.copy())
    return ImageBuffer(img.pixels + sigma * rng.standard_normal(img.pixels.shape))


@dataclass
class Mask:
    """Boolean observation grid over an image's spatial extents."""

    observed: np.ndarray

    def __post_init__(self):
        self.observed = np.asarray(self.observed, dtype=bool)

    @property
    def fraction_observed(self) -> float:
        return float(self.observed.mean())

    def to_image(self) -> ImageBuffer:
        return ImageBuffer(self.observed.astype(np.float64))


def random_mask(shape, fraction_dropped: float, rng: np.random.Generator) -> Mask:
    """Drop exactly floor(fraction * n) grid points, uniformly at random."""
    if not 0.0 <= fraction_dropped <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction_dropped}")
    shape = tuple(int(s) for s in shape)
    n = int(np.prod(shape))
    n_drop = int(math.floor(fraction_dropped * n))
    observed = np.ones(n, dtype=bool)
    if n_drop:
        drop = rng.choice(n, size=n_drop, replace=False)
        observed[drop] = False
    return Mask(observed.reshape(shape))


def _apply_mask(a: np.ndarray, b: np.ndarray, mask) -> tuple[np.ndarray, np.ndarray]:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if mask is None:
        return a.reshape(-1), b.reshape(-1)
    m = mask.observed if isinstance(mask, Mask) else np.asarray(mask, dtype=bool)
    m = np.broadcast_to(m, a.shape) if m.shape != a.shape else m
    if not m.any():
        raise ValueError("mask leaves no observed entries")
    return a[m], b[m]


def mse(a: np.ndarray, b: np.ndarray, mask=None) -> float:
    """Mean squared difference over observed (or all) entries."""
    av, bv = _apply_mask(np.asarray(a, float), np.asarray(b, float), mask)
    return float(np.mean((av - bv) ** 2))


def psnr(a: np.ndarray, b: np.ndarray, mask=None) -> float:
    """10 log10(1 / mse) in dB on the [0, 1] scale; inf for identical inputs."""
    m = mse(a, b, mask)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / m)


def write_signal(path, positions, values, observed=None) -> None:
    """CSV signal: position,value[,observed]; 17 significant digits."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if positions.shape != values.shape:
        raise ValueError("positions and values must have equal length")
    rows = []
    if observed is None:
        header = "position,value"
        for p, v in zip(positions, values):
            rows.append(f"{p:.17g},{v:.17g}")
    else:
        observed = np.asarray(observed, dtype=bool).reshape(-1)
        if observed.shape != values.shape:
            raise ValueError("observed flags must match values length")
        header = "position,value,observed"
        for p, v, o in zip(positions, values, observed):
            rows.append(f"{p:.17g},{v:.17g},{int(o)}")
    with open(path, "w") as f:
        f.write(header + "\n" + "\n".join(rows) + "\n")


def read_signal(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a CSV signal; returns (positions, values, observed)."""
    positions, values, observed = [], [], []
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty signal file")
    start = 1 if lines[0].lower().startswith("position") else 0
    width = None
    for row_no, ln in enumerate(lines[start:], start=start + 1):
        cells = ln.split(",")
        if width is None:
            width = len(cells)
            if width not in (2, 3):
                raise ValueError(f"{path}:{row_no}: expected 2 or 3 columns")
        elif len(cells) != width:
            raise ValueError(f"{path}:{row_no}: ragged row ({len(cells)} cells)")
        try:
            positions.append(float(cells[0]))
            values.append(float(cells[1]))
        except ValueError as e:
            raise ValueError(f"{path}:{row_no}: non-numeric cell") from e
        if width == 3:
            try:
                observed.append(bool(int(cells[2])))
            except ValueError as e:
                raise ValueError(f"{path}:{row_no}: non-numeric cell") from e
        else:
            observed.append(True)
    return (
        np.array(positions),
        np.array(values),
        np.array(observed, dtype=bool),
    )

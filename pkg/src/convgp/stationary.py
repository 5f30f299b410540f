"""Stationary covariance functions sampled on integer lag grids.

A :class:`StationaryKernel` stores ``K(r)`` for lags ``r`` in
``[-L, L]`` per dimension (1D vector or full 2D grid; no radial or
separable assumption, since resampling acts per axis).  Values satisfy
``K(r) = K(-r)`` and ``|K(r)| <= K(0)`` with ``K(0) > 0``; violations
beyond a small numerical slack are rejected at construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

_SYM_TOL = 1e-9
_BOUND_TOL = 1e-9


@dataclass(frozen=True)
class StationaryKernel:
    dims: int
    half_width: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.dims not in (1, 2):
            raise ValueError(f"dims must be 1 or 2, got {self.dims}")
        if self.half_width < 1:
            raise ValueError(f"half_width must be >= 1, got {self.half_width}")
        n = 2 * self.half_width + 1
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != (n,) * self.dims:
            raise ValueError(
                f"values shape {vals.shape} does not match dims={self.dims}, "
                f"half_width={self.half_width}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("kernel values must be finite")
        k0 = vals[(self.half_width,) * self.dims]
        if k0 <= 0:
            raise ValueError(f"variance K(0) must be positive, got {k0}")
        flipped = vals[(slice(None, None, -1),) * self.dims]
        if np.max(np.abs(vals - flipped)) > _SYM_TOL * k0:
            raise ValueError("kernel values must satisfy K(r) = K(-r)")
        if np.max(np.abs(vals)) > k0 * (1.0 + _BOUND_TOL):
            raise ValueError("kernel values must satisfy |K(r)| <= K(0)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def variance(self) -> float:
        """K(0)."""
        return float(self.values[(self.half_width,) * self.dims])

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.half_width, self.half_width + 1)

    def rho(self) -> np.ndarray:
        """Normalised covariance K(r) / K(0)."""
        return self.values / self.variance

    def at(self, lag) -> float:
        """K at an integer lag (scalar for 1D, pair for 2D)."""
        idx = np.atleast_1d(np.asarray(lag, dtype=np.int64))
        if idx.shape != (self.dims,):
            raise ValueError(f"lag must have {self.dims} components, got {lag!r}")
        if np.any(np.abs(idx) > self.half_width):
            raise ValueError(f"lag {lag!r} outside grid support +-{self.half_width}")
        return float(self.values[tuple(idx + self.half_width)])

    def gram(self, points: np.ndarray) -> np.ndarray:
        """Covariance matrix on a point set: M[i, j] = K(p_i - p_j).

        ``points`` is integer-valued, shape (n,) for 1D or (n, 2) for 2D.
        Raises if any pairwise lag falls outside the grid.
        """
        pts = np.asarray(points)
        if not np.all(np.equal(np.mod(pts, 1), 0)):
            raise ValueError("stationary kernels are sampled on integer coordinates")
        pts = pts.astype(np.int64)
        if self.dims == 1:
            pts = pts.reshape(-1)
            diffs = pts[:, None] - pts[None, :]
            if np.any(np.abs(diffs) > self.half_width):
                raise ValueError(
                    f"point set spans lags beyond grid support +-{self.half_width}"
                )
            return self.values[diffs + self.half_width]
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"2D points must have shape (n, 2), got {pts.shape}")
        dy = pts[:, None, 0] - pts[None, :, 0]
        dx = pts[:, None, 1] - pts[None, :, 1]
        if np.any(np.abs(dy) > self.half_width) or np.any(np.abs(dx) > self.half_width):
            raise ValueError(
                f"point set spans lags beyond grid support +-{self.half_width}"
            )
        return self.values[dy + self.half_width, dx + self.half_width]

    def cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Cross-covariance matrix: M[i, j] = K(a_i - b_j)."""
        a = np.asarray(a)
        b = np.asarray(b)
        if self.dims == 1:
            da = a.reshape(-1).astype(np.int64)
            db = b.reshape(-1).astype(np.int64)
            diffs = da[:, None] - db[None, :]
            if np.any(np.abs(diffs) > self.half_width):
                raise ValueError(
                    f"point sets span lags beyond grid support +-{self.half_width}"
                )
            return self.values[diffs + self.half_width]
        pa = a.reshape(len(a), 2).astype(np.int64)
        pb = b.reshape(len(b), 2).astype(np.int64)
        dy = pa[:, None, 0] - pb[None, :, 0]
        dx = pa[:, None, 1] - pb[None, :, 1]
        if np.any(np.abs(dy) > self.half_width) or np.any(np.abs(dx) > self.half_width):
            raise ValueError(
                f"point sets span lags beyond grid support +-{self.half_width}"
            )
        return self.values[dy + self.half_width, dx + self.half_width]

    def with_values(self, values: np.ndarray) -> "StationaryKernel":
        return StationaryKernel(self.dims, self.half_width, values)

    def cropped(self, half_width: int) -> "StationaryKernel":
        """Restriction to a narrower lag grid (values unchanged)."""
        if half_width > self.half_width:
            raise ValueError(
                f"cannot crop to {half_width}, grid holds {self.half_width}"
            )
        if half_width == self.half_width:
            return self
        lo = self.half_width - half_width
        hi = self.half_width + half_width + 1
        sl = (slice(lo, hi),) * self.dims
        return StationaryKernel(self.dims, half_width, self.values[sl])

    # -- serialization ---------------------------------------------------

    def to_text(self) -> str:
        lines = [
            "convgp-kernel 1",
            f"dims {self.dims}",
            f"half_width {self.half_width}",
            f"variance {self.variance:.17g}",
        ]
        if self.dims == 1:
            for r, v in zip(self.lags, self.values):
                lines.append(f"{r} {v:.17g}")
        else:
            for iy, ry in enumerate(self.lags):
                for ix, rx in enumerate(self.lags):
                    lines.append(f"{ry} {rx} {self.values[iy, ix]:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "StationaryKernel":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("convgp-kernel"):
            raise ValueError("not a convgp kernel file")
        header = {}
        body_start = 1
        for ln in lines[1:4]:
            key, _, val = ln.partition(" ")
            header[key] = val
            body_start += 1
        dims = int(header["dims"])
        half = int(header["half_width"])
        n = 2 * half + 1
        rows = [ln.split() for ln in lines[body_start:]]
        if dims == 1:
            if len(rows) != n:
                raise ValueError(f"expected {n} lag rows, got {len(rows)}")
            vals = np.empty(n)
            for row in rows:
                vals[int(row[0]) + half] = float(row[1])
        else:
            if len(rows) != n * n:
                raise ValueError(f"expected {n * n} lag rows, got {len(rows)}")
            vals = np.empty((n, n))
            for row in rows:
                vals[int(row[0]) + half, int(row[1]) + half] = float(row[2])
        return cls(dims, half, vals)

    def to_json_dict(self) -> dict:
        return {
            "format": "convgp-kernel",
            "dims": self.dims,
            "half_width": self.half_width,
            "variance": self.variance,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "StationaryKernel":
        if d.get("format") != "convgp-kernel":
            raise ValueError("not a convgp kernel JSON object")
        return cls(int(d["dims"]), int(d["half_width"]), np.asarray(d["values"]))


def save_kernel(kernel: StationaryKernel, path) -> None:
    with open(path, "w") as f:
        f.write(kernel.to_text())


def load_kernel(path) -> StationaryKernel:
    with open(path) as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        return StationaryKernel.from_json_dict(json.loads(text))
    return StationaryKernel.from_text(text)

"""Backend selection for the correlation kernels.

Two implementations share one contract: the compiled extension
(``convgp._native``, direct loop nests) and the numpy version
(``convgp._ref``, im2col + BLAS GEMM).  ``auto`` resolves to the numpy
backend: with a decent BLAS it outperforms the compiled loops at every
production size (see ``benchmarks/bench_conv.py`` and the README table),
and it needs no build step.  Set ``CONVGP_BACKEND=native`` to opt into
the compiled core, e.g. on numpy builds with a slow BLAS; forcing
``native`` raises if the extension was not built.
"""

from __future__ import annotations

import os

from . import _ref

_choice = os.environ.get("CONVGP_BACKEND", "auto").lower()
if _choice not in {"auto", "native", "numpy"}:
    raise ImportError(
        f"CONVGP_BACKEND must be 'auto', 'native' or 'numpy', got {_choice!r}"
    )

_impl = None
if _choice == "native":
    from . import _native as _impl  # type: ignore[no-redef]
if _impl is None:
    _impl = _ref

BACKEND: str = "numpy" if _impl is _ref else "native"

corr1d = _impl.corr1d
corr1d_grad_w = _impl.corr1d_grad_w
corr1d_grad_x = _impl.corr1d_grad_x
corr2d = _impl.corr2d
corr2d_grad_w = _impl.corr2d_grad_w
corr2d_grad_x = _impl.corr2d_grad_x

__all__ = [
    "BACKEND",
    "corr1d",
    "corr1d_grad_w",
    "corr1d_grad_x",
    "corr2d",
    "corr2d_grad_w",
    "corr2d_grad_x",
]

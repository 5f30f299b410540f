"""Pure-numpy implementation of the dense correlation kernels.

This is the fallback used when the compiled extension is unavailable
(see :mod:`convgp.backend`).  Both backends implement the identical
contract: *valid* cross-correlation of a pre-padded input against a
filter bank, plus the two adjoints.  Padding and boundary folding live
in :mod:`convgp.ops` so the semantics are defined in exactly one place.

Shapes, 1D:
    xpad : (c, T + d - 1)   padded input
    w    : (f, c, d)        filter bank
    y    : (f, T)           y[o, t] = sum_{i,j} w[o, i, j] * xpad[i, t + j]

Shapes, 2D:
    xpad : (c, H + dh - 1, W + dw - 1)
    w    : (f, c, dh, dw)
    y    : (f, H, W)

Everything is routed through BLAS matmuls: per-tap products in 1D,
im2col gathers and single GEMMs in 2D.
"""

from __future__ import annotations

import numpy as np


def _im2col_1d(xpad: np.ndarray, d: int) -> np.ndarray:
    """Gather filter windows into a (c*d, T) matrix."""
    from numpy.lib.stride_tricks import sliding_window_view

    win = sliding_window_view(xpad, d, axis=1)  # (c, T, d)
    c, t_out = win.shape[:2]
    return np.ascontiguousarray(win.transpose(0, 2, 1)).reshape(c * d, t_out)


def corr1d(xpad: np.ndarray, w: np.ndarray) -> np.ndarray:
    f, c, d = w.shape
    cols = _im2col_1d(xpad, d)
    return w.reshape(f, c * d) @ cols


def corr1d_grad_w(xpad: np.ndarray, grad_y: np.ndarray, d: int) -> np.ndarray:
    f = grad_y.shape[0]
    c = xpad.shape[0]
    cols = _im2col_1d(xpad, d)
    return (grad_y @ cols.T).reshape(f, c, d)


def corr1d_grad_x(w: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    f, c, d = w.shape
    t_out = grad_y.shape[1]
    p = (w.reshape(f, c * d).T @ grad_y).reshape(c, d, t_out)
    gx = np.zeros((c, t_out + d - 1))
    for j in range(d):
        gx[:, j : j + t_out] += p[:, j]
    return gx


def _im2col(xpad: np.ndarray, dh: int, dw: int) -> np.ndarray:
    """Gather filter windows into a (c*dh*dw, Ho*Wo) matrix."""
    from numpy.lib.stride_tricks import sliding_window_view

    win = sliding_window_view(xpad, (dh, dw), axis=(1, 2))
    c, ho, wo = win.shape[:3]
    return win.transpose(0, 3, 4, 1, 2).reshape(c * dh * dw, ho * wo)


def corr2d(xpad: np.ndarray, w: np.ndarray) -> np.ndarray:
    f, c, dh, dw = w.shape
    ho = xpad.shape[1] - dh + 1
    wo = xpad.shape[2] - dw + 1
    cols = _im2col(xpad, dh, dw)
    return (w.reshape(f, -1) @ cols).reshape(f, ho, wo)


def corr2d_grad_w(xpad: np.ndarray, grad_y: np.ndarray, dh: int, dw: int) -> np.ndarray:
    f = grad_y.shape[0]
    c = xpad.shape[0]
    cols = _im2col(xpad, dh, dw)
    return (grad_y.reshape(f, -1) @ cols.T).reshape(f, c, dh, dw)


def corr2d_grad_x(w: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    f, c, dh, dw = w.shape
    ho, wo = grad_y.shape[1:]
    p = w.reshape(f, -1).T @ grad_y.reshape(f, -1)
    p = p.reshape(c, dh, dw, ho, wo)
    gx = np.zeros((c, ho + dh - 1, wo + dw - 1))
    for a in range(dh):
        for b in range(dw):
            gx[:, a : a + ho, b : b + wo] += p[:, a, b]
    return gx

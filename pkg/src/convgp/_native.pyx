# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled correlation kernels (same contract as convgp._ref).

Per-tap axpy loops over row-flattened padded buffers: each tap touches
one long contiguous stretch, which vectorises well.  Values that cross
a row boundary in 2D land in cropped columns (forward) or multiply
embedded zeros (adjoints), exactly as in the numpy backend.

Parallel loops assign every output row to exactly one thread and keep a
fixed inner summation order, so results are bit-stable for any thread
count.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange

cimport openmp


cdef inline int _nthreads(double flops) noexcept nogil:
    # waking the OpenMP team costs tens of microseconds; stay serial
    # below that scale
    if flops < 5e5:
        return 1
    return openmp.omp_get_max_threads()

cnp.import_array()


def corr1d(double[:, ::1] xpad, double[:, :, ::1] w):
    cdef Py_ssize_t f = w.shape[0], c = w.shape[1], d = w.shape[2]
    cdef Py_ssize_t t_out = xpad.shape[1] - d + 1
    y_arr = np.zeros((f, t_out))
    cdef double[:, ::1] y = y_arr
    cdef Py_ssize_t o, i, j, t
    cdef double wv
    cdef int nt = _nthreads(2.0 * f * c * d * t_out)
    for o in prange(f, nogil=True, schedule="static", num_threads=nt):
        for i in range(c):
            for j in range(d):
                wv = w[o, i, j]
                for t in range(t_out):
                    y[o, t] += wv * xpad[i, t + j]
    return y_arr


def corr1d_grad_w(double[:, ::1] xpad, double[:, ::1] grad_y, Py_ssize_t d):
    cdef Py_ssize_t f = grad_y.shape[0], t_out = grad_y.shape[1]
    cdef Py_ssize_t c = xpad.shape[0]
    gw_arr = np.zeros((f, c, d))
    cdef double[:, :, ::1] gw = gw_arr
    cdef Py_ssize_t o, i, j, t, t8
    cdef double a0, a1, a2, a3, a4, a5, a6, a7
    cdef int nt = _nthreads(2.0 * f * c * d * t_out)
    t8 = t_out - (t_out % 8)
    for o in prange(f, nogil=True, schedule="static", num_threads=nt):
        for i in range(c):
            for j in range(d):
                a0 = 0.0; a1 = 0.0; a2 = 0.0; a3 = 0.0
                a4 = 0.0; a5 = 0.0; a6 = 0.0; a7 = 0.0
                for t in range(0, t8, 8):
                    a0 = a0 + grad_y[o, t] * xpad[i, t + j]
                    a1 = a1 + grad_y[o, t + 1] * xpad[i, t + 1 + j]
                    a2 = a2 + grad_y[o, t + 2] * xpad[i, t + 2 + j]
                    a3 = a3 + grad_y[o, t + 3] * xpad[i, t + 3 + j]
                    a4 = a4 + grad_y[o, t + 4] * xpad[i, t + 4 + j]
                    a5 = a5 + grad_y[o, t + 5] * xpad[i, t + 5 + j]
                    a6 = a6 + grad_y[o, t + 6] * xpad[i, t + 6 + j]
                    a7 = a7 + grad_y[o, t + 7] * xpad[i, t + 7 + j]
                for t in range(t8, t_out):
                    a0 = a0 + grad_y[o, t] * xpad[i, t + j]
                gw[o, i, j] = ((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))
    return gw_arr


def corr1d_grad_x(double[:, :, ::1] w, double[:, ::1] grad_y):
    cdef Py_ssize_t f = w.shape[0], c = w.shape[1], d = w.shape[2]
    cdef Py_ssize_t t_out = grad_y.shape[1]
    gx_arr = np.zeros((c, t_out + d - 1))
    cdef double[:, ::1] gx = gx_arr
    cdef Py_ssize_t o, i, j, t
    cdef double wv
    cdef int nt = _nthreads(2.0 * f * c * d * t_out)
    for i in prange(c, nogil=True, schedule="static", num_threads=nt):
        for o in range(f):
            for j in range(d):
                wv = w[o, i, j]
                for t in range(t_out):
                    gx[i, t + j] += wv * grad_y[o, t]
    return gx_arr


def corr2d(double[:, :, ::1] xpad, double[:, :, :, ::1] w):
    cdef Py_ssize_t f = w.shape[0], c = w.shape[1], dh = w.shape[2], dw = w.shape[3]
    cdef Py_ssize_t hp = xpad.shape[1], wp = xpad.shape[2]
    cdef Py_ssize_t ho = hp - dh + 1, wo = wp - dw + 1
    cdef Py_ssize_t n = (ho - 1) * wp + wo
    yf_arr = np.zeros((f, ho * wp))
    cdef double[:, ::1] yf = yf_arr
    cdef double[:, ::1] xf = np.asarray(xpad).reshape(c, hp * wp)
    cdef Py_ssize_t o, i, a, b, k, off
    cdef double wv
    cdef int nt = _nthreads(2.0 * f * c * dh * dw * n)
    for o in prange(f, nogil=True, schedule="static", num_threads=nt):
        for i in range(c):
            for a in range(dh):
                for b in range(dw):
                    wv = w[o, i, a, b]
                    off = a * wp + b
                    for k in range(n):
                        yf[o, k] += wv * xf[i, k + off]
    return np.ascontiguousarray(yf_arr.reshape(f, ho, wp)[:, :, :wo])


def corr2d_grad_w(double[:, :, ::1] xpad, double[:, :, ::1] grad_y,
                  Py_ssize_t dh, Py_ssize_t dw):
    cdef Py_ssize_t f = grad_y.shape[0], ho = grad_y.shape[1], wo = grad_y.shape[2]
    cdef Py_ssize_t c = xpad.shape[0], hp = xpad.shape[1], wp = xpad.shape[2]
    cdef Py_ssize_t n = (ho - 1) * wp + wo
    ge_arr = np.zeros((f, ho * wp))
    ge_arr.reshape(f, ho, wp)[:, :, :wo] = grad_y
    cdef double[:, ::1] ge = ge_arr
    cdef double[:, ::1] xf = np.asarray(xpad).reshape(c, hp * wp)
    gw_arr = np.zeros((f, c, dh, dw))
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t o, i, a, b, k, off, n8
    cdef double a0, a1, a2, a3, a4, a5, a6, a7
    # eight independent accumulator chains: a fixed, deterministic
    # summation order that still pipelines/vectorises (a single serial
    # chain would be FP-latency bound)
    cdef int nt = _nthreads(2.0 * f * c * dh * dw * n)
    n8 = n - (n % 8)
    for o in prange(f, nogil=True, schedule="static", num_threads=nt):
        for i in range(c):
            for a in range(dh):
                for b in range(dw):
                    off = a * wp + b
                    a0 = 0.0; a1 = 0.0; a2 = 0.0; a3 = 0.0
                    a4 = 0.0; a5 = 0.0; a6 = 0.0; a7 = 0.0
                    for k in range(0, n8, 8):
                        a0 = a0 + ge[o, k] * xf[i, k + off]
                        a1 = a1 + ge[o, k + 1] * xf[i, k + 1 + off]
                        a2 = a2 + ge[o, k + 2] * xf[i, k + 2 + off]
                        a3 = a3 + ge[o, k + 3] * xf[i, k + 3 + off]
                        a4 = a4 + ge[o, k + 4] * xf[i, k + 4 + off]
                        a5 = a5 + ge[o, k + 5] * xf[i, k + 5 + off]
                        a6 = a6 + ge[o, k + 6] * xf[i, k + 6 + off]
                        a7 = a7 + ge[o, k + 7] * xf[i, k + 7 + off]
                    for k in range(n8, n):
                        a0 = a0 + ge[o, k] * xf[i, k + off]
                    gw[o, i, a, b] = ((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))
    return gw_arr


def corr2d_grad_x(double[:, :, :, ::1] w, double[:, :, ::1] grad_y):
    cdef Py_ssize_t f = w.shape[0], c = w.shape[1], dh = w.shape[2], dw = w.shape[3]
    cdef Py_ssize_t ho = grad_y.shape[1], wo = grad_y.shape[2]
    cdef Py_ssize_t hp = ho + dh - 1, wp = wo + dw - 1
    cdef Py_ssize_t n = (ho - 1) * wp + wo
    ge_arr = np.zeros((f, ho * wp))
    ge_arr.reshape(f, ho, wp)[:, :, :wo] = grad_y
    cdef double[:, ::1] ge = ge_arr
    gx_arr = np.zeros((c, hp * wp))
    cdef double[:, ::1] gx = gx_arr
    cdef Py_ssize_t o, i, a, b, k, off
    cdef double wv
    cdef int nt = _nthreads(2.0 * f * c * dh * dw * n)
    for i in prange(c, nogil=True, schedule="static", num_threads=nt):
        for o in range(f):
            for a in range(dh):
                for b in range(dw):
                    wv = w[o, i, a, b]
                    off = a * wp + b
                    for k in range(n):
                        gx[i, k + off] += wv * ge[o, k]
    return gx_arr.reshape(c, hp, wp)

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``.

Same signatures and results; forward kernels are bit-identical to the
NumPy path, accumulating kernels may differ in the last ulp.
"""
import numpy as np
cimport numpy as cnp
from cython cimport floating
from libc.string cimport memcpy, memset

cnp.import_array()


cdef inline void _q_range(Py_ssize_t j, Py_ssize_t sw, Py_ssize_t pw, Py_ssize_t W, Py_ssize_t out_w,
                          Py_ssize_t* lo, Py_ssize_t* hi) noexcept nogil:
    # Output columns q whose tap q*sw - pw + j lands inside [0, W).
    cdef Py_ssize_t a = pw - j, b = W + pw - j
    lo[0] = (a + sw - 1) // sw if a > 0 else 0
    hi[0] = (b + sw - 1) // sw if b > 0 else 0
    if lo[0] > out_w:
        lo[0] = out_w
    if hi[0] > out_w:
        hi[0] = out_w
    if hi[0] < lo[0]:
        hi[0] = lo[0]


def im2col(floating[:, :, ::1] x, int kh, int kw, int sh, int sw, int ph, int pw,
           int row_start, int row_stop, int out_w):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t rows = row_stop - row_start
    cdef Py_ssize_t ncol = rows * out_w
    dtype = np.float32 if floating is float else np.float64
    out = np.empty((C * kh * kw, ncol), dtype=dtype)
    cdef floating[:, ::1] o = out
    cdef Py_ssize_t c, i, j, r, q, row, ih, q_lo, q_hi, base
    cdef floating* dst
    cdef const floating* src
    with nogil:
        for c in range(C):
            for i in range(kh):
                for j in range(kw):
                    row = (c * kh + i) * kw + j
                    _q_range(j, sw, pw, W, out_w, &q_lo, &q_hi)
                    for r in range(rows):
                        ih = (row_start + r) * sh - ph + i
                        dst = &o[row, r * out_w]
                        if ih < 0 or ih >= H:
                            memset(dst, 0, out_w * sizeof(floating))
                            continue
                        if q_lo > 0:
                            memset(dst, 0, q_lo * sizeof(floating))
                        if q_hi < out_w:
                            memset(dst + q_hi, 0, (out_w - q_hi) * sizeof(floating))
                        if q_hi > q_lo:
                            base = q_lo * sw - pw + j
                            src = &x[c, ih, base]
                            if sw == 1:
                                memcpy(dst + q_lo, src, (q_hi - q_lo) * sizeof(floating))
                            else:
                                for q in range(q_hi - q_lo):
                                    dst[q_lo + q] = src[q * sw]
    return out


def col2im_add(floating[:, ::1] cols, floating[:, :, ::1] grad, int kh, int kw,
               int sh, int sw, int ph, int pw, int row_start, int row_stop, int out_w):
    cdef Py_ssize_t C = grad.shape[0], H = grad.shape[1], W = grad.shape[2]
    cdef Py_ssize_t rows = row_stop - row_start
    cdef Py_ssize_t c, i, j, r, q, row, ih, q_lo, q_hi
    cdef floating* dst
    cdef const floating* src
    with nogil:
        for c in range(C):
            for i in range(kh):
                for j in range(kw):
                    row = (c * kh + i) * kw + j
                    _q_range(j, sw, pw, W, out_w, &q_lo, &q_hi)
                    if q_hi <= q_lo:
                        continue
                    for r in range(rows):
                        ih = (row_start + r) * sh - ph + i
                        if ih < 0 or ih >= H:
                            continue
                        src = &cols[row, r * out_w + q_lo]
                        dst = &grad[c, ih, q_lo * sw - pw + j]
                        for q in range(q_hi - q_lo):
                            dst[q * sw] += src[q]


def maxpool_forward(floating[:, :, :, ::1] x, int kh, int kw, int sh, int sw,
                    int out_h, int out_w):
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    dtype = np.float32 if floating is float else np.float64
    out = np.empty((N, C, out_h, out_w), dtype=dtype)
    arg = np.empty((N, C, out_h, out_w), dtype=np.int32)
    cdef floating[:, :, :, ::1] o = out
    cdef int[:, :, :, ::1] a = arg
    cdef Py_ssize_t n, c, oh, ow, h, w, hs, he, ws, we, best_i
    cdef floating best, v
    with nogil:
        for n in range(N):
            for c in range(C):
                for oh in range(out_h):
                    hs = oh * sh
                    he = hs + kh
                    if he > H:
                        he = H
                    for ow in range(out_w):
                        ws = ow * sw
                        we = ws + kw
                        if we > W:
                            we = W
                        best = x[n, c, hs, ws]
                        best_i = hs * W + ws
                        for h in range(hs, he):
                            for w in range(ws, we):
                                v = x[n, c, h, w]
                                if v > best:
                                    best = v
                                    best_i = h * W + w
                        o[n, c, oh, ow] = best
                        a[n, c, oh, ow] = <int>best_i
    return out, arg


def maxpool_backward(int[:, :, :, ::1] argmax, floating[:, :, :, ::1] grad_out,
                     int in_h, int in_w):
    cdef Py_ssize_t N = grad_out.shape[0], C = grad_out.shape[1]
    cdef Py_ssize_t out_h = grad_out.shape[2], out_w = grad_out.shape[3]
    dtype = np.float32 if floating is float else np.float64
    res = np.zeros((N, C, in_h, in_w), dtype=dtype)
    cdef floating[:, :, :, ::1] g = res
    cdef Py_ssize_t n, c, oh, ow, k
    with nogil:
        for n in range(N):
            for c in range(C):
                for oh in range(out_h):
                    for ow in range(out_w):
                        k = argmax[n, c, oh, ow]
                        g[n, c, k // in_w, k % in_w] += grad_out[n, c, oh, ow]
    return res


def resize_forward(floating[:, :, :, ::1] x,
                   cnp.intp_t[::1] h0, cnp.intp_t[::1] h1, floating[::1] hw0, floating[::1] hw1,
                   cnp.intp_t[::1] w0, cnp.intp_t[::1] w1, floating[::1] ww0, floating[::1] ww1):
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1]
    cdef Py_ssize_t out_h = h0.shape[0], out_w = w0.shape[0]
    dtype = np.float32 if floating is float else np.float64
    out = np.empty((N, C, out_h, out_w), dtype=dtype)
    cdef floating[:, :, :, ::1] o = out
    cdef Py_ssize_t n, c, i, j, r0, r1, c0, c1
    cdef floating top, bot
    with nogil:
        for n in range(N):
            for c in range(C):
                for i in range(out_h):
                    r0 = h0[i]
                    r1 = h1[i]
                    for j in range(out_w):
                        c0 = w0[j]
                        c1 = w1[j]
                        top = x[n, c, r0, c0] * ww0[j] + x[n, c, r0, c1] * ww1[j]
                        bot = x[n, c, r1, c0] * ww0[j] + x[n, c, r1, c1] * ww1[j]
                        o[n, c, i, j] = top * hw0[i] + bot * hw1[i]
    return out


def resize_adjoint(floating[:, :, :, ::1] g,
                   cnp.intp_t[::1] h0, cnp.intp_t[::1] h1, floating[::1] hw0, floating[::1] hw1,
                   cnp.intp_t[::1] w0, cnp.intp_t[::1] w1, floating[::1] ww0, floating[::1] ww1,
                   int in_h, int in_w):
    cdef Py_ssize_t N = g.shape[0], C = g.shape[1]
    cdef Py_ssize_t out_h = g.shape[2], out_w = g.shape[3]
    dtype = np.float32 if floating is float else np.float64
    res = np.zeros((N, C, in_h, in_w), dtype=dtype)
    cdef floating[:, :, :, ::1] r = res
    cdef Py_ssize_t n, c, i, j
    cdef floating v, a0, a1
    with nogil:
        for n in range(N):
            for c in range(C):
                for i in range(out_h):
                    a0 = hw0[i]
                    a1 = hw1[i]
                    for j in range(out_w):
                        v = g[n, c, i, j]
                        r[n, c, h0[i], w0[j]] += v * a0 * ww0[j]
                        r[n, c, h0[i], w1[j]] += v * a0 * ww1[j]
                        r[n, c, h1[i], w0[j]] += v * a1 * ww0[j]
                        r[n, c, h1[i], w1[j]] += v * a1 * ww1[j]
    return res

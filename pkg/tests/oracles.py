"""Brute-force reference implementations, written independently of the
package kernels and used only by tests."""
import math

import numpy as np


def conv_direct(x, w, b, stride=(1, 1), pad=(0, 0)):
    """Six nested loops (plus batch) of zero-padded cross-correlation, float64."""
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    sh, sw = stride
    ph, pw = pad
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (wd + 2 * pw - kw) // sw + 1
    out = np.zeros((n, o, oh, ow))
    for bi in range(n):
        for oc in range(o):
            for i in range(oh):
                for j in range(ow):
                    acc = float(b[oc])
                    for ic in range(c):
                        for di in range(kh):
                            for dj in range(kw):
                                r = i * sh - ph + di
                                q = j * sw - pw + dj
                                if 0 <= r < h and 0 <= q < wd:
                                    acc += float(x[bi, ic, r, q]) * float(w[oc, ic, di, dj])
                    out[bi, oc, i, j] = acc
    return out


def bilinear_scalar(plane, out_h, out_w):
    """Per-pixel bilinear sampling with half-pixel centres, clamped."""
    in_h, in_w = plane.shape
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        sy = min(max((i + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, in_h - 1)
        fy = sy - y0
        for j in range(out_w):
            sx = min(max((j + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, in_w - 1)
            fx = sx - x0
            out[i, j] = ((1 - fy) * ((1 - fx) * plane[y0, x0] + fx * plane[y0, x1])
                         + fy * ((1 - fx) * plane[y1, x0] + fx * plane[y1, x1]))
    return out


def bilinear_matrix(in_hw, out_hw):
    """Dense (out_h*out_w, in_h*in_w) interpolation matrix, one column per
    unit impulse through the scalar oracle."""
    n_in = in_hw[0] * in_hw[1]
    mat = np.zeros((out_hw[0] * out_hw[1], n_in))
    for k in range(n_in):
        e = np.zeros(n_in)
        e[k] = 1.0
        mat[:, k] = bilinear_scalar(e.reshape(in_hw), *out_hw).ravel()
    return mat


def maxpool_loops(x, k=2, s=2):
    """Ceil-mode max pooling by explicit window scans; first maximum wins."""
    n, c, h, w = x.shape
    oh = -(-(h - k) // s) + 1
    ow = -(-(w - k) // s) + 1
    out = np.zeros((n, c, oh, ow), dtype=x.dtype)
    arg = np.zeros((n, c, oh, ow), dtype=np.int64)
    for a in range(n):
        for b in range(c):
            for i in range(oh):
                for j in range(ow):
                    best, best_idx = None, None
                    for r in range(i * s, min(i * s + k, h)):
                        for q in range(j * s, min(j * s + k, w)):
                            if best is None or x[a, b, r, q] > best:
                                best, best_idx = x[a, b, r, q], r * w + q
                    out[a, b, i, j] = best
                    arg[a, b, i, j] = best_idx
    return out, arg


def maxpool_backward_loops(arg, g, in_shape):
    n, c, h, w = in_shape
    out = np.zeros(in_shape, dtype=g.dtype)
    for a in range(n):
        for b in range(c):
            for i in range(g.shape[2]):
                for j in range(g.shape[3]):
                    idx = int(arg[a, b, i, j])
                    out[a, b, idx // w, idx % w] += g[a, b, i, j]
    return out

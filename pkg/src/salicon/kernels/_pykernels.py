"""Pure-NumPy kernels; used when the compiled extension is unavailable.

Every function here has a twin of the same signature in ``_ckernels.pyx``.
Arrays are float32 or float64, C-contiguous.
"""
import numpy as np
from numpy.lib.stride_tricks import as_strided


def im2col(x, kh, kw, sh, sw, ph, pw, row_start, row_stop, out_w):
    """Unfold output rows ``[row_start, row_stop)`` of one image into columns.

    ``x`` has shape (C, H, W). Returns (C*kh*kw, (row_stop-row_start)*out_w),
    with out-of-bounds taps read as zero.
    """
    C, H, W = x.shape
    rows = row_stop - row_start
    top = row_start * sh - ph
    span = (rows - 1) * sh + kh
    width = (out_w - 1) * sw + kw
    xp = np.zeros((C, span, width), dtype=x.dtype)
    src_lo, src_hi = max(top, 0), min(top + span, H)
    col_lo, col_hi = max(-pw, 0), min(width - pw, W)
    if src_hi > src_lo and col_hi > col_lo:
        xp[:, src_lo - top:src_hi - top, col_lo + pw:col_hi + pw] = x[:, src_lo:src_hi, col_lo:col_hi]
    s = xp.strides
    view = as_strided(
        xp,
        shape=(C, kh, kw, rows, out_w),
        strides=(s[0], s[1], s[2], s[1] * sh, s[2] * sw),
        writeable=False,
    )
    return view.reshape(C * kh * kw, rows * out_w)


def col2im_add(cols, grad, kh, kw, sh, sw, ph, pw, row_start, row_stop, out_w):
    """Adjoint of :func:`im2col`: scatter-add ``cols`` into ``grad`` (C, H, W)."""
    C, H, W = grad.shape
    rows = row_stop - row_start
    top = row_start * sh - ph
    span = (rows - 1) * sh + kh
    width = (out_w - 1) * sw + kw
    gp = np.zeros((C, span, width), dtype=grad.dtype)
    c6 = cols.reshape(C, kh, kw, rows, out_w)
    for i in range(kh):
        for j in range(kw):
            gp[:, i:i + (rows - 1) * sh + 1:sh, j:j + (out_w - 1) * sw + 1:sw] += c6[:, i, j]
    src_lo, src_hi = max(top, 0), min(top + span, H)
    col_lo, col_hi = max(-pw, 0), min(width - pw, W)
    if src_hi > src_lo and col_hi > col_lo:
        grad[:, src_lo:src_hi, col_lo:col_hi] += gp[:, src_lo - top:src_hi - top, col_lo + pw:col_hi + pw]


def maxpool_forward(x, kh, kw, sh, sw, out_h, out_w):
    """Max over each window; returns (output, argmax) where argmax is the
    in-plane flat index ``h*W + w`` of the first maximal element."""
    N, C, H, W = x.shape
    need_h = (out_h - 1) * sh + kh
    need_w = (out_w - 1) * sw + kw
    xp = np.full((N, C, max(need_h, H), max(need_w, W)), -np.inf, dtype=x.dtype)
    xp[:, :, :H, :W] = x
    s = xp.strides
    win = as_strided(
        xp,
        shape=(N, C, out_h, out_w, kh, kw),
        strides=(s[0], s[1], s[2] * sh, s[3] * sw, s[2], s[3]),
        writeable=False,
    ).reshape(N, C, out_h, out_w, kh * kw)
    k = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, k[..., None], axis=-1)[..., 0]
    rows = np.arange(out_h)[:, None] * sh + k // kw
    cols = np.arange(out_w)[None, :] * sw + k % kw
    argmax = (rows * W + cols).astype(np.int32)
    return np.ascontiguousarray(out), argmax


def maxpool_backward(argmax, grad_out, in_h, in_w):
    N, C, out_h, out_w = grad_out.shape
    plane = in_h * in_w
    offsets = (np.arange(N * C, dtype=np.int64) * plane)[:, None]
    idx = (argmax.reshape(N * C, -1).astype(np.int64) + offsets).ravel()
    acc = np.bincount(idx, weights=grad_out.ravel(), minlength=N * C * plane)
    return acc.astype(grad_out.dtype).reshape(N, C, in_h, in_w)


def resize_forward(x, h0, h1, hw0, hw1, w0, w1, ww0, ww1):
    """Separable two-tap interpolation: columns first, then rows."""
    tmp = x[:, :, :, w0] * ww0 + x[:, :, :, w1] * ww1
    out = tmp[:, :, h0, :] * hw0[:, None] + tmp[:, :, h1, :] * hw1[:, None]
    return np.ascontiguousarray(out)


def _scatter_axis(g, i0, i1, wt0, wt1, size, axis):
    """Transpose of a two-tap gather along ``axis`` (2 or 3)."""
    g = np.moveaxis(g, axis, -1)
    lead = g.shape[:-1]
    flat = g.reshape(-1, g.shape[-1])
    m = flat.shape[0]
    out = np.zeros((m, size), dtype=g.dtype)
    # Column-wise accumulation keeps the order fixed and avoids np.add.at.
    for j in range(flat.shape[1]):
        out[:, i0[j]] += flat[:, j] * wt0[j]
        out[:, i1[j]] += flat[:, j] * wt1[j]
    return np.moveaxis(out.reshape(*lead, size), -1, axis)


def resize_adjoint(g, h0, h1, hw0, hw1, w0, w1, ww0, ww1, in_h, in_w):
    tmp = _scatter_axis(g, h0, h1, hw0, hw1, in_h, 2)
    out = _scatter_axis(tmp, w0, w1, ww0, ww1, in_w, 3)
    return np.ascontiguousarray(out)

"""Forward and backward kernels for every layer kind in the saliency graph.

All functions are pure: they allocate their outputs and never mutate their
inputs. They accept float32 or float64 tensors and return the same dtype.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, ShapeError

# Target size of one im2col chunk, in elements.
CHUNK_ELEMENTS = 1 << 23

INTERP_MODES = ("adjoint", "paper-resize")


@dataclass
class ConvParams:
    weights: np.ndarray  # (out_channels, in_channels, kh, kw)
    bias: np.ndarray  # (out_channels,)
    stride: tuple[int, int] = (1, 1)
    pad: tuple[int, int] = (0, 0)

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel(self) -> tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]


@dataclass(frozen=True)
class PoolParams:
    window: tuple[int, int] = (2, 2)
    stride: tuple[int, int] = (2, 2)


def conv_output_size(size: int, k: int, s: int, p: int) -> int:
    return (size + 2 * p - k) // s + 1


def pool_output_size(size: int, k: int, s: int) -> int:
    """Ceil-mode pooling extent; every window starts inside the input."""
    out = -(-(size - k) // s) + 1
    if (out - 1) * s >= size:
        out -= 1
    return max(out, 1)


def _conv_geometry(x, p: ConvParams):
    if x.ndim != 4:
        raise ShapeError(f"conv input must be rank 4, got shape {x.shape}")
    n, c, h, w = x.shape
    if c != p.in_channels:
        raise ShapeError(f"conv input has {c} channels, weights expect {p.in_channels}")
    if p.bias.shape != (p.out_channels,):
        raise ShapeError(f"bias shape {p.bias.shape} does not match {p.out_channels} output channels")
    kh, kw = p.kernel
    sh, sw = p.stride
    ph, pw = p.pad
    oh = conv_output_size(h, kh, sh, ph)
    ow = conv_output_size(w, kw, sw, pw)
    if oh < 1 or ow < 1:
        raise ShapeError(f"input {h}x{w} is smaller than kernel {kh}x{kw} with pad {ph},{pw}")
    return n, c, h, w, kh, kw, sh, sw, ph, pw, oh, ow


def _is_pointwise(kh, kw, sh, sw, ph, pw) -> bool:
    return kh == kw == sh == sw == 1 and ph == pw == 0


def _row_chunks(c, kh, kw, oh, ow):
    rows = max(1, CHUNK_ELEMENTS // max(1, c * kh * kw * ow))
    for r0 in range(0, oh, rows):
        yield r0, min(oh, r0 + rows)


def conv2d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Zero-padded cross-correlation plus per-channel bias (im2col + GEMM)."""
    n, c, h, w, kh, kw, sh, sw, ph, pw, oh, ow = _conv_geometry(x, p)
    dtype = x.dtype
    wmat = p.weights.reshape(p.out_channels, -1).astype(dtype, copy=False)
    bias = p.bias.astype(dtype, copy=False)[:, None]
    out = np.empty((n, p.out_channels, oh * ow), dtype=dtype)
    for i in range(n):
        xi = np.ascontiguousarray(x[i])
        if _is_pointwise(kh, kw, sh, sw, ph, pw):
            np.matmul(wmat, xi.reshape(c, h * w), out=out[i])
        else:
            for r0, r1 in _row_chunks(c, kh, kw, oh, ow):
                cols = kernels.im2col(xi, kh, kw, sh, sw, ph, pw, r0, r1, ow)
                np.matmul(wmat, cols, out=out[i, :, r0 * ow:r1 * ow])
        out[i] += bias
    return out.reshape(n, p.out_channels, oh, ow)


def conv2d_backward(x: np.ndarray, p: ConvParams, grad_out: np.ndarray, need_input: bool = True):
    """Gradients of ``sum(grad_out * conv2d_forward(x, p))``.

    Returns ``(grad_input, grad_weights, grad_bias)``; ``grad_input`` is
    None when ``need_input`` is false.
    """
    n, c, h, w, kh, kw, sh, sw, ph, pw, oh, ow = _conv_geometry(x, p)
    if grad_out.shape != (n, p.out_channels, oh, ow):
        raise ShapeError(f"grad_out shape {grad_out.shape} != forward output {(n, p.out_channels, oh, ow)}")
    dtype = x.dtype
    o = p.out_channels
    wmat = p.weights.reshape(o, -1).astype(dtype, copy=False)
    gw = np.zeros((o, c * kh * kw), dtype=dtype)
    gb = grad_out.sum(axis=(0, 2, 3), dtype=np.float64).astype(dtype)
    gx = np.zeros_like(x) if need_input else None
    pointwise = _is_pointwise(kh, kw, sh, sw, ph, pw)
    for i in range(n):
        xi = np.ascontiguousarray(x[i])
        g = np.ascontiguousarray(grad_out[i]).reshape(o, oh * ow)
        if pointwise:
            gw += g @ xi.reshape(c, h * w).T
            if need_input:
                gx[i] = (wmat.T @ g).reshape(c, h, w)
            continue
        for r0, r1 in _row_chunks(c, kh, kw, oh, ow):
            gc = g[:, r0 * ow:r1 * ow]
            cols = kernels.im2col(xi, kh, kw, sh, sw, ph, pw, r0, r1, ow)
            gw += gc @ cols.T
            if need_input:
                dcols = np.ascontiguousarray(wmat.T @ gc)
                kernels.col2im_add(dcols, gx[i], kh, kw, sh, sw, ph, pw, r0, r1, ow)
    return gx, gw.reshape(p.weights.shape), gb


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # Gradient at exactly zero is zero.
    if x.shape != grad_out.shape:
        raise ShapeError(f"relu backward shape mismatch: {x.shape} vs {grad_out.shape}")
    return np.where(x > 0, grad_out, 0).astype(grad_out.dtype, copy=False)


def maxpool_forward(x: np.ndarray, p: PoolParams = PoolParams()):
    """Ceil-mode max pooling.

    Returns ``(output, argmax)``; ``argmax`` holds, for each output element,
    the in-plane index ``h * W + w`` of the selected input element.
    """
    if x.ndim != 4:
        raise ShapeError(f"pool input must be rank 4, got shape {x.shape}")
    _, _, h, w = x.shape
    (kh, kw), (sh, sw) = p.window, p.stride
    oh, ow = pool_output_size(h, kh, sh), pool_output_size(w, kw, sw)
    return kernels.maxpool_forward(np.ascontiguousarray(x), kh, kw, sh, sw, oh, ow)


def maxpool_backward(argmax: np.ndarray, grad_out: np.ndarray, in_dims) -> np.ndarray:
    n, c, h, w = in_dims
    if argmax.shape != grad_out.shape or grad_out.shape[:2] != (n, c):
        raise ShapeError(f"argmax {argmax.shape} / grad_out {grad_out.shape} inconsistent with input {tuple(in_dims)}")
    if argmax.size and (argmax.min() < 0 or argmax.max() >= h * w):
        raise ShapeError("argmax index outside the input plane")
    return kernels.maxpool_backward(
        np.ascontiguousarray(argmax, dtype=np.int32), np.ascontiguousarray(grad_out), h, w
    )


def interp_taps(in_size: int, out_size: int, dtype=np.float32):
    """Two-tap bilinear sampling along one axis, half-pixel centres.

    Output index ``d`` reads source coordinate ``(d + 0.5) * in/out - 0.5``,
    clamped to ``[0, in-1]``. Returns ``(i0, i1, w0, w1)``.
    """
    d = np.arange(out_size, dtype=np.float64)
    src = np.clip((d + 0.5) * (in_size / out_size) - 0.5, 0.0, in_size - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, in_size - 1)
    frac = src - i0
    return i0, i1, (1.0 - frac).astype(dtype), frac.astype(dtype)


def _taps(in_hw, out_hw, dtype):
    return interp_taps(in_hw[0], out_hw[0], dtype) + interp_taps(in_hw[1], out_hw[1], dtype)


def bilinear_resize_forward(x: np.ndarray, out_hw) -> np.ndarray:
    if x.ndim != 4:
        raise ShapeError(f"resize input must be rank 4, got shape {x.shape}")
    out_hw = (int(out_hw[0]), int(out_hw[1]))
    if min(out_hw) < 1:
        raise ShapeError(f"resize target must be at least 1x1, got {out_hw}")
    in_hw = x.shape[2:]
    if tuple(in_hw) == out_hw:
        return x.copy()
    return kernels.resize_forward(np.ascontiguousarray(x), *_taps(in_hw, out_hw, x.dtype))


def bilinear_resize_backward(grad_out: np.ndarray, in_hw, mode: str = "adjoint") -> np.ndarray:
    """Gradient of the resize with respect to its input.

    ``adjoint`` applies the exact transpose of the forward interpolation.
    ``paper-resize`` bilinearly resizes the gradient back to the input size,
    which is not the true gradient but reproduces the original layer.
    """
    if grad_out.ndim != 4:
        raise ShapeError(f"grad_out must be rank 4, got shape {grad_out.shape}")
    in_hw = (int(in_hw[0]), int(in_hw[1]))
    out_hw = grad_out.shape[2:]
    if mode == "paper-resize":
        return bilinear_resize_forward(grad_out, in_hw)
    if mode != "adjoint":
        raise ValueError(f"unknown interpolation backward mode {mode!r}; expected one of {INTERP_MODES}")
    if tuple(out_hw) == in_hw:
        return grad_out.copy()
    return kernels.resize_adjoint(
        np.ascontiguousarray(grad_out), *_taps(in_hw, out_hw, grad_out.dtype), in_hw[0], in_hw[1]
    )


def concat_channels(*blobs: np.ndarray) -> np.ndarray:
    first = blobs[0]
    for b in blobs[1:]:
        if b.shape[0] != first.shape[0] or b.shape[2:] != first.shape[2:]:
            raise ShapeError(f"cannot concatenate {first.shape} with {b.shape}: batch/spatial dims differ")
    return np.concatenate(blobs, axis=1)


def concat_backward(grad_out: np.ndarray, channels) -> list[np.ndarray]:
    """Split ``grad_out`` back into per-input channel ranges."""
    if sum(channels) != grad_out.shape[1]:
        raise ShapeError(f"channel split {list(channels)} does not cover {grad_out.shape[1]} channels")
    bounds = np.cumsum(channels)[:-1]
    return [np.ascontiguousarray(g) for g in np.split(grad_out, bounds, axis=1)]


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    if np.isnan(z).any():
        out[:] = np.nan
        return out
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_cross_entropy(logits: np.ndarray, target: np.ndarray):
    """Mean per-pixel binary cross entropy on logits.

    Returns ``(loss, grad_logits)`` where ``grad_logits = (sigmoid(z) - t) / N``.
    """
    if logits.shape != target.shape:
        raise ShapeError(f"logits {logits.shape} and target {target.shape} differ")
    t = np.asarray(target, dtype=np.float64)
    if t.size and (t.min() < 0 or t.max() > 1 or not np.all(np.isfinite(t))):
        raise DomainError("fixation targets must lie in [0, 1]")
    z = np.asarray(logits, dtype=np.float64)
    n = z.size
    with np.errstate(over="ignore", invalid="ignore"):
        per = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
        loss = float(per.sum() / n)
        grad = ((sigmoid(z) - t) / n).astype(logits.dtype)
    return loss, grad

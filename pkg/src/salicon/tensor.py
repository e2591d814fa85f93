"""Rank-4 tensors.

A Tensor4 is a C-contiguous ``numpy.ndarray`` of shape ``(n, c, h, w)``
holding 32-bit floats. Kernels also accept float64 arrays, which the
gradient checks use; storage and serialization are always float32.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError, SizeError

DTYPE = np.float32

# Upper bound on elements in a single tensor (16 GiB of float32).
MAX_ELEMENTS = 1 << 32


def _check_dims(dims) -> tuple[int, int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4:
        raise SizeError(f"expected 4 dims, got {len(dims)}: {dims}")
    if any(d < 1 for d in dims):
        raise SizeError(f"all dims must be >= 1, got {dims}")
    total = 1
    for d in dims:
        total *= d
    if total > MAX_ELEMENTS:
        raise SizeError(f"dims {dims} hold {total} elements, above the limit of {MAX_ELEMENTS}")
    return dims


def new_filled(dims, value: float = 0.0, dtype=DTYPE) -> np.ndarray:
    """Allocate a tensor of ``dims`` with every element set to ``value``."""
    return np.full(_check_dims(dims), value, dtype=dtype)


def zeros_like(t: np.ndarray) -> np.ndarray:
    return np.zeros_like(t)


def as_tensor4(data, dtype=DTYPE) -> np.ndarray:
    """Validate and convert ``data`` to a contiguous rank-4 array."""
    arr = np.ascontiguousarray(data, dtype=dtype)
    if arr.ndim != 4:
        raise ShapeError(f"expected a rank-4 tensor, got shape {arr.shape}")
    _check_dims(arr.shape)
    return arr


def from_flat(flat, dims, dtype=DTYPE) -> np.ndarray:
    dims = _check_dims(dims)
    flat = np.asarray(flat, dtype=dtype)
    if flat.size != np.prod(dims):
        raise ShapeError(f"{flat.size} values cannot fill dims {dims}")
    return flat.reshape(dims).copy()


def flat_offset(dims, n: int, c: int, h: int, w: int) -> int:
    """Row-major offset of element (n, c, h, w), w fastest."""
    _, C, H, W = dims
    return ((n * C + c) * H + h) * W + w


def saxpy_inplace(target: np.ndarray, source: np.ndarray, alpha: float) -> np.ndarray:
    """``target += alpha * source``; returns ``target``."""
    if target.shape != source.shape:
        raise ShapeError(f"saxpy dims mismatch: {target.shape} vs {source.shape}")
    if alpha == 0:
        return target
    if alpha == 1:
        target += source
    else:
        target += target.dtype.type(alpha) * source
    return target


def assert_finite(t: np.ndarray, name: str = "tensor") -> None:
    if not np.all(np.isfinite(t)):
        bad = int(np.size(t) - np.count_nonzero(np.isfinite(t)))
        raise DomainError(f"{name} has {bad} non-finite value(s)")

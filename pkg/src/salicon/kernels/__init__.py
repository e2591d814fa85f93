"""Hot inner kernels with a compiled core and a NumPy fallback.

The Cython extension ``_ckernels`` is used when it was built; otherwise the
pure-NumPy ``_pykernels`` are imported. Set ``SALICON_KERNELS=python`` to
force the fallback.
"""
import os

from . import _pykernels

python = _pykernels

compiled = None
if os.environ.get("SALICON_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else _pykernels
BACKEND = "cython" if compiled is not None else "python"

im2col = active.im2col
col2im_add = active.col2im_add
maxpool_forward = active.maxpool_forward
maxpool_backward = active.maxpool_backward
resize_forward = active.resize_forward
resize_adjoint = active.resize_adjoint

__all__ = [
    "BACKEND",
    "col2im_add",
    "compiled",
    "im2col",
    "maxpool_backward",
    "maxpool_forward",
    "python",
    "resize_adjoint",
    "resize_forward",
]

"""Two-stream multi-scale saliency engine.

Fine and coarse VGG-16 stacks run on the same image at two scales; the
coarse stream's last pooling output is bilinearly upsampled, concatenated
with the fine one, and fused by a 1x1 convolution into a saliency map.
Every layer has an explicit forward and backward kernel.
"""
from .engine import Salicon
from .kernels import BACKEND as KERNEL_BACKEND
from .netgraph import (
    LayerSpec,
    NetSpec,
    Network,
    build_miniature_spec,
    build_salicon_spec,
    infer_shapes,
    load_netspec,
)
from .weights import WeightStore, load, save, transplant_vgg

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "LayerSpec",
    "NetSpec",
    "Network",
    "Salicon",
    "WeightStore",
    "build_miniature_spec",
    "build_salicon_spec",
    "infer_shapes",
    "load",
    "load_netspec",
    "save",
    "transplant_vgg",
]

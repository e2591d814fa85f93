"""High-level saliency API: load a model once, then map images to saliency."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from . import imaging
from .netgraph import Network, load_netspec, parse_netspec
from .weights import WeightStore, load


def shipped_netspec(name: str = "salicon.netspec") -> Path:
    """Path of a spec file bundled with the package."""
    return Path(str(resources.files("salicon") / "netspecs" / name))


class Salicon:
    """Two-stream saliency model bound to a weight file and a spec file.

    >>> model = Salicon("salicon.ntw")                   # doctest: +SKIP
    >>> sal = model.compute_saliency("/path/to/img.png")  # doctest: +SKIP
    """

    def __init__(self, model, netspec=None, preproc: imaging.PreprocConfig | None = None):
        if isinstance(model, WeightStore):
            weights = model
        else:
            weights = load(model)
        if netspec is None:
            netspec = shipped_netspec()
        spec = netspec if hasattr(netspec, "layers") else load_netspec(netspec)
        self.spec = spec
        self.net = Network(spec, weights)
        self.preproc = preproc or imaging.PreprocConfig.for_spec(spec)

    def logits(self, img: imaging.RawImage) -> np.ndarray:
        fine, coarse = imaging.preprocess(img, self.preproc)
        out = self.net.forward({"fine_scale": fine, "coarse_scale": coarse}, keep="none")
        return out["saliency_map"]

    def saliency(self, img: imaging.RawImage, threshold: float | None = None) -> np.ndarray:
        """Saliency in [0, 1] at the image's own resolution."""
        return imaging.postprocess(self.logits(img), (img.height, img.width), threshold)

    def compute_saliency(self, path, threshold: float | None = None) -> np.ndarray:
        return self.saliency(imaging.decode_image(path), threshold)


__all__ = ["Salicon", "parse_netspec", "shipped_netspec"]

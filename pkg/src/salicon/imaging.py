"""Image decoding, dual-scale preprocessing, and saliency postprocessing.

Resizing everywhere goes through :func:`salicon.layers.bilinear_resize_forward`
so the network's interpolation layer and the pre/post steps share one kernel.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import layers as L
from .errors import DecodeError, DomainError, ShapeError

SUPPORTED_FORMATS = ("PNG", "PPM")
VGG_BGR_MEANS = (103.939, 116.779, 123.68)


@dataclass
class RawImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8, RGB

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DecodeError(f"image must be at least 1x1, got {self.width}x{self.height}")
        if self.pixels.shape != (self.height, self.width, 3) or self.pixels.dtype != np.uint8:
            raise DecodeError(f"pixel array {self.pixels.shape}/{self.pixels.dtype} does not match "
                              f"{self.height}x{self.width}x3 uint8")


@dataclass
class PreprocConfig:
    channel_means: tuple[float, float, float] = VGG_BGR_MEANS
    fine_hw: tuple[int, int] = (1200, 1600)
    coarse_hw: tuple[int, int] = (600, 800)
    swap_rgb_to_bgr: bool = True

    def __post_init__(self):
        if len(self.channel_means) != 3:
            raise ValueError("channel_means needs exactly 3 values")
        if min(*self.fine_hw, *self.coarse_hw) < 1:
            raise ValueError(f"scales must be positive, got {self.fine_hw} / {self.coarse_hw}")

    @classmethod
    def for_spec(cls, spec, **overrides) -> "PreprocConfig":
        """Take the fine/coarse sizes from a two-stream spec's input layers."""
        dims = spec.input_dims
        return cls(fine_hw=tuple(dims["fine_scale"][2:]), coarse_hw=tuple(dims["coarse_scale"][2:]), **overrides)


def _to_array(img: Image.Image) -> np.ndarray:
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.float64)
        return np.clip(np.rint(arr / 257.0), 0, 255).astype(np.uint8)
    if img.mode not in ("L", "RGB"):
        img = img.convert("L" if img.mode in ("1", "LA") else "RGB")
    return np.asarray(img, dtype=np.uint8)


def _open(path) -> Image.Image:
    try:
        img = Image.open(path)
        fmt = img.format
        img.load()
    except FileNotFoundError:
        raise DecodeError(f"image not found: {path}") from None
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from None
    if fmt not in SUPPORTED_FORMATS:
        raise DecodeError(f"{path}: unsupported format {fmt}; convert to PNG or PPM")
    return img


def decode_image(path) -> RawImage:
    """Read a PNG or binary PPM; grayscale is replicated to RGB."""
    arr = _to_array(_open(path))
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    arr = np.ascontiguousarray(arr)
    return RawImage(width=arr.shape[1], height=arr.shape[0], pixels=arr)


def decode_gray(path) -> np.ndarray:
    """Read a single-channel map as a (height, width) uint8 array."""
    arr = _to_array(_open(path))
    if arr.ndim == 3:
        arr = np.asarray(Image.fromarray(arr).convert("L"))
    return arr


def preprocess(img: RawImage, cfg: PreprocConfig = PreprocConfig()):
    """Image -> (fine, coarse) network inputs, mean-subtracted."""
    x = img.pixels.astype(np.float32)
    if cfg.swap_rgb_to_bgr:
        x = x[:, :, ::-1]
    x = np.ascontiguousarray(x.transpose(2, 0, 1))[None]
    means = np.asarray(cfg.channel_means, dtype=np.float32).reshape(1, 3, 1, 1)
    fine = L.bilinear_resize_forward(x, cfg.fine_hw)
    fine -= means
    coarse = L.bilinear_resize_forward(x, cfg.coarse_hw)
    coarse -= means
    return fine, coarse


def postprocess(logits: np.ndarray, out_hw, threshold: float | None = None) -> np.ndarray:
    """Logits (1, 1, h, w) -> saliency map of size ``out_hw`` in [0, 1].

    Values below ``threshold`` are zeroed when a threshold is given.
    """
    logits = np.asarray(logits)
    if logits.ndim != 4 or logits.shape[:2] != (1, 1):
        raise ShapeError(f"logits must be (1, 1, h, w), got {logits.shape}")
    if threshold is not None and not 0.0 <= threshold <= 1.0:
        raise DomainError(f"threshold must be in [0, 1], got {threshold}")
    prob = L.sigmoid(logits)
    sal = L.bilinear_resize_forward(prob, out_hw)[0, 0]
    np.clip(sal, 0.0, 1.0, out=sal)
    if threshold is not None:
        sal[sal < threshold] = 0.0
    return sal


def load_fixation_map(path, loss_hw=(38, 50)) -> np.ndarray:
    """Grayscale fixation map -> (1, 1, h, w) float32 target in [0, 1]."""
    gray = decode_gray(path).astype(np.float32) / np.float32(255.0)
    t = L.bilinear_resize_forward(gray[None, None], loss_hw)
    return np.clip(t, 0.0, 1.0)


def to_uint8(saliency: np.ndarray) -> np.ndarray:
    """Map [0, 1] to 0..255 with round-half-up."""
    return np.floor(np.clip(saliency, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_saliency_png(saliency: np.ndarray, path) -> None:
    Image.fromarray(to_uint8(saliency), mode="L").save(path, format="PNG")


def save_raw(saliency: np.ndarray, path) -> None:
    """Little-endian float32 dump, row-major."""
    Path(path).write_bytes(np.ascontiguousarray(saliency, dtype="<f4").tobytes())


def write_ppm(path, pixels: np.ndarray) -> None:
    """Write an (h, w, 3) uint8 array as binary P6."""
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    h, w, _ = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())

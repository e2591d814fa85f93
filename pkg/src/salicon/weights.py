"""Named-tensor weight stores and the NTW1 binary format.

NTW1 layout, all integers little-endian::

    b"NTW1"                      magic, 4 bytes
    u32                          entry count
    per entry:
        u16                      name length in bytes
        bytes                    UTF-8 name
        u32 x 4                  dims (n, c, h, w)
        f32 x n*c*h*w            IEEE-754 payload, row-major

Biases are stored as (1, 1, 1, len) tensors.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError, TransplantError

MAGIC = b"NTW1"
FORMAT_VERSION = 1

VGG16_BLOCKS = ((64, 2), (128, 2), (256, 3), (512, 3), (512, 3))
VGG16_CONV_LAYERS = tuple(
    f"conv{b}_{i}" for b, (_, reps) in enumerate(VGG16_BLOCKS, start=1) for i in range(1, reps + 1)
)


def weight_name(layer: str) -> str:
    return f"{layer}.weights"


def bias_name(layer: str) -> str:
    return f"{layer}.bias"


class WeightStore:
    """Ordered mapping of parameter name to float32 rank-4 tensor."""

    def __init__(self, entries=None, metadata=None):
        self._entries: dict[str, np.ndarray] = {}
        self.metadata = {"format_version": FORMAT_VERSION, "note": ""}
        if metadata:
            self.metadata.update(metadata)
        for name, value in (entries or {}).items():
            self[name] = value

    def __setitem__(self, name: str, value) -> None:
        arr = np.ascontiguousarray(value, dtype=np.float32)
        if arr.ndim == 1:
            arr = arr.reshape(1, 1, 1, -1)
        if arr.ndim != 4:
            raise ShapeError(f"entry {name!r} must be rank 4, got shape {arr.shape}")
        if len(name.encode("utf-8")) > 0xFFFF:
            raise FormatError(f"entry name too long: {name[:40]}...")
        self._entries[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._entries[name]

    def __contains__(self, name) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def copy(self) -> "WeightStore":
        return WeightStore({k: v.copy() for k, v in self._entries.items()}, dict(self.metadata))

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if self.names() != other.names():
            return False
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self._entries.values(), other._entries.values())
        )

    def __repr__(self) -> str:
        total = sum(v.size for v in self._entries.values())
        return f"WeightStore({len(self)} entries, {total} values)"


def encode(store: WeightStore) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(store))]
    for name, arr in store.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<4I", *arr.shape))
        parts.append(arr.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def decode(buf: bytes) -> WeightStore:
    mv = memoryview(buf)
    size = len(mv)
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > size:
            raise FormatError(f"truncated file while reading {what}: need {n} bytes, {size - pos} left", pos)
        chunk = mv[pos:pos + n]
        pos += n
        return chunk

    if size < 4 or bytes(mv[:4]) != MAGIC:
        raise FormatError("bad magic, not an NTW1 weight file", 0)
    pos = 4
    (count,) = struct.unpack("<I", take(4, "entry count"))
    store = WeightStore()
    for k in range(count):
        (nlen,) = struct.unpack("<H", take(2, f"name length of entry {k}"))
        name_at = pos
        try:
            name = bytes(take(nlen, f"name of entry {k}")).decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"entry {k} name is not valid UTF-8", name_at) from None
        if name in store:
            raise FormatError(f"duplicate entry name {name!r}", name_at)
        dims_at = pos
        dims = struct.unpack("<4I", take(16, f"dims of {name!r}"))
        if min(dims) < 1:
            raise FormatError(f"entry {name!r} has a zero dimension {dims}", dims_at)
        count_vals = int(np.prod(dims, dtype=np.int64))
        payload = take(4 * count_vals, f"payload of {name!r}")
        store[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(dims)
    if pos != size:
        raise FormatError(f"{size - pos} trailing bytes after the last entry", pos)
    return store


def save(store: WeightStore, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(encode(store))
    os.replace(tmp, path)


def load(path) -> WeightStore:
    with open(path, "rb") as fh:
        store = decode(fh.read())
    store.metadata["source"] = str(path)
    return store


def import_raw(manifest_path) -> WeightStore:
    """Build a store from a text manifest of raw float32 files.

    Each non-blank, non-comment line reads ``name n c h w relative/path.f32``;
    paths are resolved against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    store = WeightStore(metadata={"note": f"imported from {manifest_path}"})
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 6:
            raise FormatError(f"{manifest_path}:{lineno}: expected 'name n c h w path', got {line!r}")
        name, *dim_txt, rel = fields
        try:
            dims = tuple(int(d) for d in dim_txt)
        except ValueError:
            raise FormatError(f"{manifest_path}:{lineno}: entry {name!r} has non-integer dims") from None
        if min(dims) < 1:
            raise FormatError(f"{manifest_path}:{lineno}: entry {name!r} has a zero dimension")
        if name in store:
            raise FormatError(f"{manifest_path}:{lineno}: duplicate entry {name!r}")
        raw_path = base / rel
        try:
            raw = raw_path.read_bytes()
        except OSError as exc:
            raise FormatError(f"entry {name!r}: cannot read {raw_path}: {exc.strerror}") from None
        expected = 4 * int(np.prod(dims))
        if len(raw) != expected:
            raise FormatError(f"entry {name!r}: {raw_path} holds {len(raw)} bytes, dims {dims} need {expected}")
        store[name] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(dims)
    return store


def transplant_vgg(vgg: WeightStore, spec, rng_seed: int = 0, gaussian_std: float = 0.01,
                   bias_const: float = 0.0, init_layers=("saliency_map",)) -> WeightStore:
    """Copy single-stream VGG conv weights into both streams of ``spec``.

    A layer ``convX_Y`` or ``sec_convX_Y`` takes ``convX_Y`` from ``vgg``;
    any other tensors in ``vgg`` (fully-connected ones) are ignored. Layers in
    ``init_layers`` get N(0, gaussian_std) weights and constant biases.
    """
    rng = np.random.default_rng(rng_seed)
    out = WeightStore(metadata={
        "note": "transplanted",
        "rng_seed": rng_seed,
        "gaussian_std": gaussian_std,
        "bias_const": bias_const,
    })
    for layer in spec.layers:
        if layer.kind != "conv":
            continue
        w_shape, b_shape = spec.param_shapes()[layer.name]
        if layer.name in init_layers:
            out[weight_name(layer.name)] = rng.normal(0.0, gaussian_std, size=w_shape).astype(np.float32)
            out[bias_name(layer.name)] = np.full(b_shape, bias_const, dtype=np.float32)
            continue
        src = layer.name[4:] if layer.name.startswith("sec_") else layer.name
        for key, shape in ((weight_name(src), w_shape), (bias_name(src), b_shape)):
            if key not in vgg:
                raise TransplantError(f"layer {layer.name!r}: source tensor {key!r} missing from VGG weights")
            if vgg[key].shape != shape:
                raise ShapeError(f"layer {layer.name!r}: {key!r} has dims {vgg[key].shape}, expected {shape}")
        out[weight_name(layer.name)] = vgg[weight_name(src)].copy()
        out[bias_name(layer.name)] = vgg[bias_name(src)].copy()
    return out

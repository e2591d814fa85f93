"""Declarative layer graphs, shape inference, and forward/backward execution.

Network spec text format
------------------------
A ``.netspec`` file is a list of layer records. ``#`` starts a comment,
blank lines are ignored, and every record opens with a ``layer:`` line::

    net: salicon

    layer: conv1_1
    kind: conv
    bottom: fine_scale
    top: conv1_1
    out_channels: 64
    kernel: 3 3
    stride: 1 1
    pad: 1 1
    lr_mult: 1
    lr_mult_bias: 2
    decay_mult: 1
    decay_mult_bias: 0

``bottom`` may repeat. Kind-specific keys: ``input`` takes ``dims: n c h w``;
``conv`` takes ``out_channels``, ``kernel``, ``stride``, ``pad``;
``maxpool`` takes ``window`` and ``stride`` (ceil rounding is implied);
``bilinear_resize`` takes ``size: h w``. ``relu``, ``concat`` and ``loss``
have no parameters; ``loss`` reads ``bottom: logits`` then
``bottom: target``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import layers as L
from .errors import GraphError, InputError, ShapeError, StateError
from .weights import VGG16_BLOCKS, WeightStore, bias_name, weight_name

LAYER_KINDS = ("input", "conv", "relu", "maxpool", "bilinear_resize", "concat", "loss")

_PAIR_KEYS = {"kernel", "stride", "pad", "window", "size"}
_MULT_KEYS = ("lr_mult", "lr_mult_bias", "decay_mult", "decay_mult_bias")
_KIND_KEYS = {
    "input": {"dims"},
    "conv": {"out_channels", "kernel", "stride", "pad"},
    "relu": set(),
    "maxpool": {"window", "stride"},
    "bilinear_resize": {"size"},
    "concat": set(),
    "loss": set(),
}


@dataclass
class LayerSpec:
    name: str
    kind: str
    bottoms: list[str] = field(default_factory=list)
    tops: list[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    lr_mult: float = 1.0
    lr_mult_bias: float = 1.0
    decay_mult: float = 1.0
    decay_mult_bias: float = 1.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise GraphError(f"layer {self.name!r}: unknown kind {self.kind!r}")
        for key in _MULT_KEYS:
            if getattr(self, key) < 0:
                raise GraphError(f"layer {self.name!r}: {key} must be >= 0")

    @property
    def trainable(self) -> bool:
        return self.kind == "conv" and (self.lr_mult > 0 or self.lr_mult_bias > 0)


@dataclass
class NetSpec:
    layers: list[LayerSpec]
    name: str = "net"

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    @property
    def input_dims(self) -> dict[str, tuple]:
        return {lay.tops[0]: tuple(lay.params["dims"]) for lay in self.layers if lay.kind == "input"}

    @property
    def loss_layers(self) -> list[LayerSpec]:
        return [lay for lay in self.layers if lay.kind == "loss"]

    def param_shapes(self) -> dict[str, tuple[tuple, tuple]]:
        """Conv layer name -> (weight dims, bias dims as (1, 1, 1, out))."""
        shapes = infer_shapes(self)
        out = {}
        for lay in self.layers:
            if lay.kind == "conv":
                in_c = shapes[lay.bottoms[0]][1]
                kh, kw = lay.params["kernel"]
                oc = lay.params["out_channels"]
                out[lay.name] = ((oc, in_c, kh, kw), (1, 1, 1, oc))
        return out


# ---------------------------------------------------------------------------
# text format


def _fmt_num(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


def dump_netspec(spec: NetSpec) -> str:
    lines = [f"net: {spec.name}", ""]
    for lay in spec.layers:
        lines.append(f"layer: {lay.name}")
        lines.append(f"kind: {lay.kind}")
        lines.extend(f"bottom: {b}" for b in lay.bottoms)
        lines.extend(f"top: {t}" for t in lay.tops)
        for key, value in lay.params.items():
            if isinstance(value, (tuple, list)):
                value = " ".join(str(v) for v in value)
            lines.append(f"{key}: {value}")
        if lay.kind == "conv":
            lines.extend(f"{key}: {_fmt_num(getattr(lay, key))}" for key in _MULT_KEYS)
        lines.append("")
    return "\n".join(lines)


def parse_netspec(text: str) -> NetSpec:
    name = "net"
    records: list[tuple[int, dict]] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise GraphError(f"line {lineno}: expected 'key: value', got {line!r}")
        key, value = (s.strip() for s in line.split(":", 1))
        if key == "net" and current is None:
            name = value
        elif key == "layer":
            current = {"name": value, "bottoms": [], "tops": [], "params": {}}
            records.append((lineno, current))
        elif current is None:
            raise GraphError(f"line {lineno}: {key!r} appears before any 'layer:' record")
        elif key == "kind":
            current["kind"] = value
        elif key == "bottom":
            current["bottoms"].append(value)
        elif key == "top":
            current["tops"].append(value)
        elif key in _MULT_KEYS:
            try:
                current[key] = float(value)
            except ValueError:
                raise GraphError(f"line {lineno}: {key} must be a number, got {value!r}") from None
        else:
            current["params"][key] = value

    layers = []
    for lineno, rec in records:
        kind = rec.pop("kind", None)
        if kind not in LAYER_KINDS:
            raise GraphError(f"line {lineno}: layer {rec['name']!r} has unknown kind {kind!r}")
        raw_params = rec.pop("params")
        unknown = set(raw_params) - _KIND_KEYS[kind]
        if unknown:
            raise GraphError(f"line {lineno}: layer {rec['name']!r} ({kind}) has unknown keys {sorted(unknown)}")
        params = {}
        try:
            for key, value in raw_params.items():
                nums = tuple(int(v) for v in value.split())
                if key == "dims":
                    if len(nums) != 4:
                        raise ValueError
                    params[key] = nums
                elif key in _PAIR_KEYS:
                    params[key] = nums * 2 if len(nums) == 1 else nums
                    if len(params[key]) != 2:
                        raise ValueError
                else:
                    (params[key],) = nums
        except ValueError:
            raise GraphError(f"line {lineno}: layer {rec['name']!r} has a malformed {key!r} value") from None
        layers.append(LayerSpec(kind=kind, params=_with_defaults(kind, params, rec["name"]), **rec))
    return NetSpec(layers=layers, name=name)


def _with_defaults(kind, params, name):
    if kind == "conv":
        if "out_channels" not in params or "kernel" not in params:
            raise GraphError(f"conv layer {name!r} needs out_channels and kernel")
        params.setdefault("stride", (1, 1))
        params.setdefault("pad", (0, 0))
    elif kind == "maxpool":
        params.setdefault("window", (2, 2))
        params.setdefault("stride", params["window"])
    elif kind == "bilinear_resize" and "size" not in params:
        raise GraphError(f"bilinear_resize layer {name!r} needs size")
    elif kind == "input" and "dims" not in params:
        raise GraphError(f"input layer {name!r} needs dims")
    return params


def load_netspec(path) -> NetSpec:
    return parse_netspec(Path(path).read_text())


def save_netspec(spec: NetSpec, path) -> None:
    Path(path).write_text(dump_netspec(spec))


# ---------------------------------------------------------------------------
# shape inference


def topological_order(spec: NetSpec) -> list[LayerSpec]:
    """Layers sorted so every bottom is produced before it is consumed.

    Ties keep declaration order. Raises GraphError on duplicate names,
    blobs produced twice, unknown bottoms, or cycles.
    """
    names = [lay.name for lay in spec.layers]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise GraphError(f"duplicate layer names: {dup}")
    producer: dict[str, LayerSpec] = {}
    for lay in spec.layers:
        if not lay.tops:
            raise GraphError(f"layer {lay.name!r} has no top blob")
        for top in lay.tops:
            if top in producer:
                raise GraphError(f"blob {top!r} produced by both {producer[top].name!r} and {lay.name!r}")
            producer[top] = lay
    for lay in spec.layers:
        for b in lay.bottoms:
            if b not in producer:
                raise GraphError(f"layer {lay.name!r} reads blob {b!r} which no layer produces")

    done: set[str] = set()
    order: list[LayerSpec] = []
    pending = list(spec.layers)
    while pending:
        for i, lay in enumerate(pending):
            if all(producer[b].name in done for b in lay.bottoms):
                order.append(lay)
                done.add(lay.name)
                del pending[i]
                break
        else:
            raise GraphError(f"cycle among layers {[lay.name for lay in pending]}")
    return order


def _expect_bottoms(lay, count):
    if len(lay.bottoms) != count:
        raise GraphError(f"layer {lay.name!r} ({lay.kind}) needs {count} bottom(s), has {len(lay.bottoms)}")


def infer_shapes(spec: NetSpec) -> dict[str, tuple]:
    """Dims of every blob in the graph."""
    shapes: dict[str, tuple] = {}
    for lay in topological_order(spec):
        if len(lay.tops) != 1:
            raise GraphError(f"layer {lay.name!r} must have exactly one top")
        top = lay.tops[0]
        if lay.kind == "input":
            _expect_bottoms(lay, 0)
            dims = tuple(lay.params["dims"])
            if len(dims) != 4 or min(dims) < 1:
                raise ShapeError(f"input {lay.name!r} has invalid dims {dims}")
        elif lay.kind == "conv":
            _expect_bottoms(lay, 1)
            n, _, h, w = shapes[lay.bottoms[0]]
            (kh, kw), (sh, sw), (ph, pw) = lay.params["kernel"], lay.params["stride"], lay.params["pad"]
            oh, ow = L.conv_output_size(h, kh, sh, ph), L.conv_output_size(w, kw, sw, pw)
            if oh < 1 or ow < 1:
                raise ShapeError(f"conv {lay.name!r}: input {lay.bottoms[0]!r} {h}x{w} too small for kernel")
            dims = (n, lay.params["out_channels"], oh, ow)
        elif lay.kind == "relu":
            _expect_bottoms(lay, 1)
            dims = shapes[lay.bottoms[0]]
        elif lay.kind == "maxpool":
            _expect_bottoms(lay, 1)
            n, c, h, w = shapes[lay.bottoms[0]]
            (kh, kw), (sh, sw) = lay.params["window"], lay.params["stride"]
            dims = (n, c, L.pool_output_size(h, kh, sh), L.pool_output_size(w, kw, sw))
        elif lay.kind == "bilinear_resize":
            _expect_bottoms(lay, 1)
            n, c, _, _ = shapes[lay.bottoms[0]]
            dims = (n, c, *lay.params["size"])
        elif lay.kind == "concat":
            if not lay.bottoms:
                raise GraphError(f"concat {lay.name!r} has no bottoms")
            first = lay.bottoms[0]
            ref = shapes[first]
            for b in lay.bottoms[1:]:
                other = shapes[b]
                if other[0] != ref[0] or other[2:] != ref[2:]:
                    raise ShapeError(
                        f"concat {lay.name!r}: blob {first!r} {ref} and blob {b!r} {other} differ in batch/spatial dims"
                    )
            dims = (ref[0], sum(shapes[b][1] for b in lay.bottoms), ref[2], ref[3])
        elif lay.kind == "loss":
            _expect_bottoms(lay, 2)
            a, b = lay.bottoms
            if shapes[a] != shapes[b]:
                raise ShapeError(f"loss {lay.name!r}: blob {a!r} {shapes[a]} and blob {b!r} {shapes[b]} differ")
            dims = (1, 1, 1, 1)
        shapes[top] = tuple(int(d) for d in dims)
    return shapes


# ---------------------------------------------------------------------------
# execution


class Network:
    """An instantiated graph: parameters, activations, and gradients.

    Parameters live in ``params`` keyed ``<layer>.weights`` (out, in, kh, kw)
    and ``<layer>.bias`` (out,). A Network is single-writer.
    """

    def __init__(self, spec: NetSpec, weights: WeightStore | None = None,
                 interp_backward_mode: str = "adjoint", dtype=np.float32):
        if interp_backward_mode not in L.INTERP_MODES:
            raise ValueError(f"unknown interpolation backward mode {interp_backward_mode!r}")
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.interp_backward_mode = interp_backward_mode
        self.order = topological_order(spec)
        self.shapes = infer_shapes(spec)
        self.producer = {top: lay for lay in self.order for top in lay.tops}
        self.params: dict[str, np.ndarray] = {}
        for lay_name, (w_shape, b_shape) in spec.param_shapes().items():
            self.params[weight_name(lay_name)] = np.zeros(w_shape, dtype=self.dtype)
            self.params[bias_name(lay_name)] = np.zeros(b_shape[-1], dtype=self.dtype)
        self.activations: dict[str, np.ndarray] = {}
        self.gradients: dict[str, np.ndarray] = {}
        self.loss: float | None = None
        self._argmax: dict[str, np.ndarray] = {}
        self._loss_grad: dict[str, np.ndarray] = {}
        self._forward_kept = False
        if weights is not None:
            self.load_weights(weights)

    # -- parameters ---------------------------------------------------------

    def load_weights(self, store: WeightStore) -> None:
        missing = [k for k in self.params if k not in store]
        if missing:
            raise InputError(f"weights missing {len(missing)} parameter(s), e.g. {missing[:3]}")
        for key, current in self.params.items():
            src = store[key]
            want = current.shape if current.ndim == 4 else (1, 1, 1, current.shape[0])
            if src.shape != want:
                raise ShapeError(f"parameter {key!r}: stored dims {src.shape}, network expects {want}")
            self.params[key] = src.reshape(current.shape).astype(self.dtype, copy=True)

    def weight_store(self) -> WeightStore:
        store = WeightStore(metadata={"note": f"snapshot of {self.spec.name}"})
        for key, value in self.params.items():
            store[key] = value if value.ndim == 4 else value.reshape(1, 1, 1, -1)
        return store

    def conv_params(self, lay: LayerSpec) -> L.ConvParams:
        return L.ConvParams(
            weights=self.params[weight_name(lay.name)],
            bias=self.params[bias_name(lay.name)],
            stride=tuple(lay.params["stride"]),
            pad=tuple(lay.params["pad"]),
        )

    # -- forward ------------------------------------------------------------

    def forward(self, inputs: dict, keep="all") -> dict:
        """Run every layer in topological order and return the retained blobs.

        ``keep`` controls which activations survive the pass: ``"all"`` (or
        True) keeps every blob; ``"backward"`` keeps only what
        :meth:`backward` reads plus terminal blobs; ``"none"`` (or False)
        keeps terminal blobs only, for inference.
        """
        keep = {True: "all", False: "none"}.get(keep, keep)
        if keep not in ("all", "backward", "none"):
            raise ValueError(f"keep must be 'all', 'backward' or 'none', got {keep!r}")
        for top, dims in self.spec.input_dims.items():
            if top not in inputs:
                raise InputError(f"missing input blob {top!r} with dims {dims}")
            if tuple(np.shape(inputs[top])) != dims:
                raise InputError(f"input blob {top!r} has dims {tuple(np.shape(inputs[top]))}, expected {dims}")
        acts: dict[str, np.ndarray] = {}
        self.activations = acts
        self.gradients = {}
        self._argmax = {}
        self._loss_grad = {}
        self.loss = None
        remaining = {}
        for lay in self.order:
            for b in lay.bottoms:
                remaining[b] = remaining.get(b, 0) + 1
        retain = set()
        if keep == "all":
            retain = set(self.producer)
        elif keep == "backward":
            need = self._layers_needing_grad()
            retain = {b for lay in self.order if lay.name in need for b in lay.bottoms}

        for lay in self.order:
            top = lay.tops[0]
            bots = [acts[b] for b in lay.bottoms]
            if lay.kind == "input":
                out = np.ascontiguousarray(inputs[top], dtype=self.dtype)
            elif lay.kind == "conv":
                out = L.conv2d_forward(bots[0], self.conv_params(lay))
            elif lay.kind == "relu":
                out = L.relu_forward(bots[0])
            elif lay.kind == "maxpool":
                out, argmax = L.maxpool_forward(bots[0], L.PoolParams(lay.params["window"], lay.params["stride"]))
                if keep != "none":
                    self._argmax[lay.name] = argmax
            elif lay.kind == "bilinear_resize":
                out = L.bilinear_resize_forward(bots[0], lay.params["size"])
            elif lay.kind == "concat":
                out = L.concat_channels(*bots)
            elif lay.kind == "loss":
                value, grad = L.sigmoid_cross_entropy(bots[0], bots[1])
                self._loss_grad[lay.name] = grad
                self.loss = value if self.loss is None else self.loss + value
                out = np.full((1, 1, 1, 1), value, dtype=self.dtype)
            acts[top] = out
            for b in lay.bottoms:
                remaining[b] -= 1
                if remaining[b] == 0 and b not in retain:
                    del acts[b]
        self._forward_kept = keep != "none"
        return dict(acts)

    # -- backward -----------------------------------------------------------

    def _layers_needing_grad(self) -> set[str]:
        need: set[str] = set()
        for lay in self.order:
            if lay.trainable or any(self.producer[b].name in need for b in lay.bottoms):
                need.add(lay.name)
        return need

    def backward(self) -> None:
        """Populate ``gradients`` for every trainable parameter.

        Layers with no trainable parameter at or below them are skipped.
        """
        if not self._forward_kept or not self.activations:
            raise StateError("backward() requires a preceding forward() that kept activations")
        if not self._loss_grad:
            raise StateError("backward() requires a loss layer in the network")
        need = self._layers_needing_grad()
        acts = self.activations
        blob_grad: dict[str, np.ndarray] = {}

        def push(blob, g):
            if self.producer[blob].name not in need:
                return
            if blob in blob_grad:
                blob_grad[blob] = blob_grad[blob] + g
            else:
                blob_grad[blob] = g

        for lay in reversed(self.order):
            if lay.name not in need or lay.kind == "input":
                continue
            if lay.kind == "loss":
                push(lay.bottoms[0], self._loss_grad[lay.name])
                continue
            g = blob_grad.get(lay.tops[0])
            if g is None:
                continue
            x = acts[lay.bottoms[0]]
            if lay.kind == "conv":
                bottom_needs = self.producer[lay.bottoms[0]].name in need
                gx, gw, gb = L.conv2d_backward(x, self.conv_params(lay), g, need_input=bottom_needs)
                if lay.lr_mult > 0:
                    self.gradients[weight_name(lay.name)] = gw
                if lay.lr_mult_bias > 0:
                    self.gradients[bias_name(lay.name)] = gb
                if gx is not None:
                    push(lay.bottoms[0], gx)
            elif lay.kind == "relu":
                push(lay.bottoms[0], L.relu_backward(x, g))
            elif lay.kind == "maxpool":
                push(lay.bottoms[0], L.maxpool_backward(self._argmax[lay.name], g, x.shape))
            elif lay.kind == "bilinear_resize":
                push(lay.bottoms[0], L.bilinear_resize_backward(g, x.shape[2:], self.interp_backward_mode))
            elif lay.kind == "concat":
                parts = L.concat_backward(g, [acts[b].shape[1] for b in lay.bottoms])
                for b, part in zip(lay.bottoms, parts):
                    push(b, part)
        for blob, g in blob_grad.items():
            self.gradients[blob] = g


# ---------------------------------------------------------------------------
# canonical architectures

FINE_DIMS = (1, 3, 1200, 1600)
COARSE_DIMS = (1, 3, 600, 800)
DEFAULT_FROZEN_BLOCKS = 3

TRAIN_MULTS = dict(lr_mult=1.0, lr_mult_bias=2.0, decay_mult=1.0, decay_mult_bias=0.0)
FROZEN_MULTS = dict(lr_mult=0.0, lr_mult_bias=0.0, decay_mult=0.0, decay_mult_bias=0.0)


def _stream(prefix, bottom, blocks, frozen):
    out = []
    for b, (channels, reps) in enumerate(blocks, start=1):
        for i in range(1, reps + 1):
            conv = f"{prefix}conv{b}_{i}"
            relu = f"{prefix}relu{b}_{i}"
            mults = FROZEN_MULTS if f"conv{b}_{i}" in frozen else TRAIN_MULTS
            out.append(LayerSpec(conv, "conv", [bottom], [conv],
                                 {"out_channels": channels, "kernel": (3, 3), "stride": (1, 1), "pad": (1, 1)},
                                 **mults))
            out.append(LayerSpec(relu, "relu", [conv], [relu]))
            bottom = relu
        pool = f"{prefix}pool{b}"
        out.append(LayerSpec(pool, "maxpool", [bottom], [pool], {"window": (2, 2), "stride": (2, 2)}))
        bottom = pool
    return out, bottom


def stream_output_hw(in_hw, n_blocks: int) -> tuple[int, int]:
    h, w = in_hw
    for _ in range(n_blocks):
        h, w = L.pool_output_size(h, 2, 2), L.pool_output_size(w, 2, 2)
    return h, w


def build_two_stream_spec(blocks, mode: str = "inference", fine_dims=FINE_DIMS, coarse_dims=COARSE_DIMS,
                          frozen=(), name: str = "salicon") -> NetSpec:
    """Two VGG-style stacks on fine and coarse inputs, fused by a 1x1 conv.

    The coarse stream's last pool is bilinearly resized to the fine stream's
    last pool size. ``frozen`` lists unprefixed conv names (``conv1_1``) whose
    multipliers are zeroed in training mode.
    """
    if mode not in ("inference", "training"):
        raise ValueError(f"mode must be 'inference' or 'training', got {mode!r}")
    frozen = set(frozen) if mode == "training" else set()
    layers = [
        LayerSpec("fine_data", "input", [], ["fine_scale"], {"dims": tuple(fine_dims)}),
        LayerSpec("coarse_data", "input", [], ["coarse_scale"], {"dims": tuple(coarse_dims)}),
    ]
    fine, fine_top = _stream("", "fine_scale", blocks, frozen)
    coarse, coarse_top = _stream("sec_", "coarse_scale", blocks, frozen)
    size = stream_output_hw(fine_dims[2:], len(blocks))
    layers += fine + coarse
    layers.append(LayerSpec("custom_interpolation_layer", "bilinear_resize", [coarse_top], ["interpolated_data"],
                            {"size": size}))
    layers.append(LayerSpec("concat", "concat", [fine_top, "interpolated_data"], ["concat"]))
    layers.append(LayerSpec("saliency_map", "conv", ["concat"], ["saliency_map"],
                            {"out_channels": 1, "kernel": (1, 1), "stride": (1, 1), "pad": (0, 0)},
                            **TRAIN_MULTS))
    if mode == "training":
        layers.insert(2, LayerSpec("gt_data", "input", [], ["ground_truth"], {"dims": (1, 1, *size)}))
        layers.append(LayerSpec("loss", "loss", ["saliency_map", "ground_truth"], ["loss"]))
    return NetSpec(layers=layers, name=name)


def default_frozen(blocks, n_frozen_blocks: int = DEFAULT_FROZEN_BLOCKS) -> tuple[str, ...]:
    return tuple(
        f"conv{b}_{i}"
        for b, (_, reps) in enumerate(blocks[:n_frozen_blocks], start=1)
        for i in range(1, reps + 1)
    )


def build_salicon_spec(mode: str = "inference", fine_dims=FINE_DIMS, coarse_dims=COARSE_DIMS,
                       frozen=None) -> NetSpec:
    """The canonical two-stream VGG-16 saliency graph."""
    if frozen is None:
        frozen = default_frozen(VGG16_BLOCKS)
    name = "salicon" if mode == "inference" else "finetune_salicon"
    return build_two_stream_spec(VGG16_BLOCKS, mode, fine_dims, coarse_dims, frozen, name)


MINI_BLOCKS = ((4, 1), (6, 1))
SMALL_BLOCKS = ((4, 1), (6, 2), (8, 1))


def build_miniature_spec(mode: str = "training", scale: str = "tiny", frozen=("conv1_1",)) -> NetSpec:
    """Scaled-down two-stream graph for gradient checks and toy training.

    ``tiny``: inputs 1x3x24x32 / 1x3x12x16, two conv blocks per stream.
    ``small``: inputs 1x3x48x64 / 1x3x24x32, three blocks.
    """
    if scale == "tiny":
        blocks, fine, coarse = MINI_BLOCKS, (1, 3, 24, 32), (1, 3, 12, 16)
    elif scale == "small":
        blocks, fine, coarse = SMALL_BLOCKS, (1, 3, 48, 64), (1, 3, 24, 32)
    else:
        raise ValueError(f"unknown miniature scale {scale!r}")
    return build_two_stream_spec(blocks, mode, fine, coarse, frozen, name=f"mini_{scale}")

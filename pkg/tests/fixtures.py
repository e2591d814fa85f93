"""Shared builders for weight and image fixtures."""
from pathlib import Path

import numpy as np

from salicon.weights import VGG16_BLOCKS, WeightStore, bias_name, weight_name


def random_vgg(seed=0, blocks=VGG16_BLOCKS, fc=False) -> WeightStore:
    """Single-stream VGG-style store with He-scaled random conv weights."""
    rng = np.random.default_rng(seed)
    store = WeightStore()
    c_in = 3
    for b, (c_out, reps) in enumerate(blocks, start=1):
        for r in range(1, reps + 1):
            name = f"conv{b}_{r}"
            std = np.sqrt(2.0 / (c_in * 9))
            store[weight_name(name)] = rng.normal(0, std, (c_out, c_in, 3, 3)).astype(np.float32)
            store[bias_name(name)] = np.zeros(c_out, np.float32)
            c_in = c_out
    if fc:
        store["fc6.weights"] = rng.standard_normal((1, 1, 4, 8)).astype(np.float32)
        store["fc6.bias"] = np.zeros(4, np.float32)
    return store


def write_manifest(store: WeightStore, directory) -> Path:
    directory = Path(directory)
    lines = []
    for i, (name, arr) in enumerate(store.items()):
        raw = directory / f"t{i}.f32"
        raw.write_bytes(arr.astype("<f4").tobytes())
        lines.append(f"{name} {' '.join(map(str, arr.shape))} {raw.name}")
    manifest = directory / "manifest.txt"
    manifest.write_text("# name n c h w file\n" + "\n".join(lines) + "\n")
    return manifest


def toy_problem(seed=0):
    """Miniature training net (float32) plus one synthetic sample."""
    from salicon.gradcheck import random_inputs, random_network
    from salicon.netgraph import build_miniature_spec
    from salicon.solver import FixationSample

    spec = build_miniature_spec("training")
    inp = random_inputs(spec, seed, dtype=np.float32)
    sample = FixationSample("toy", inp["fine_scale"], inp["coarse_scale"], inp["ground_truth"])
    net = random_network(spec, seed, dtype=np.float32)
    net.params["saliency_map.bias"][:] = 0
    return net, sample


def write_pair_dirs(root, ids, extra_images=(), extra_fix=(), size=(6, 8), seed=0):
    rng = np.random.default_rng(seed)
    img_dir, fix_dir = Path(root) / "images", Path(root) / "fixations"
    img_dir.mkdir()
    fix_dir.mkdir()
    from PIL import Image

    for i in list(ids) + list(extra_images):
        Image.fromarray(rng.integers(0, 256, (*size, 3), dtype=np.uint8), "RGB").save(img_dir / f"{i}.png")
    for i in list(ids) + list(extra_fix):
        Image.fromarray(rng.integers(0, 256, size, dtype=np.uint8), "L").save(fix_dir / f"{i}.png")
    return img_dir, fix_dir

"""Time-budgeted single-sample SGD fine-tuning.

Each update uses the gradient of one image. Per parameter tensor ``w``
with multipliers ``lr_mult`` and ``decay_mult``::

    v <- momentum * v - base_lr * lr_mult * (g + weight_decay * decay_mult * w)
    w <- w + v

Parameters with ``lr_mult == 0`` are skipped entirely.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import imaging, layers
from .errors import ConfigError, DatasetError, DivergenceError, StateError
from .weights import bias_name, save, weight_name

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")


@dataclass
class SolverConfig:
    base_lr: float = 1e-7
    momentum: float = 0.9
    weight_decay: float = 5e-4
    time_budget: float = 150 * 60.0  # seconds
    max_updates: int | None = None  # when set, replaces the wall-clock budget
    rng_seed: int = 0
    train_fraction: float = 0.8
    snapshot_path: str | None = None
    interp_backward_mode: str = "adjoint"

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ConfigError(f"base_lr must be > 0, got {self.base_lr}")
        if not 0 < self.train_fraction <= 1:
            raise ConfigError(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if self.time_budget < 0:
            raise ConfigError("time_budget must be >= 0")
        if self.max_updates is not None and self.max_updates < 0:
            raise ConfigError("max_updates must be >= 0")
        if self.interp_backward_mode not in layers.INTERP_MODES:
            raise ConfigError(f"interp_backward_mode must be one of {layers.INTERP_MODES}")


@dataclass
class FixationSample:
    id: str
    fine: np.ndarray
    coarse: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        if self.target.size and (self.target.min() < 0 or self.target.max() > 1):
            raise DatasetError(f"sample {self.id!r}: target values outside [0, 1]")


class ProgressRecord(NamedTuple):
    epoch: int
    index: int
    sample_id: str
    loss: float


class CsvProgress:
    """Progress sink writing ``epoch,index,sample_id,loss`` lines."""

    def __init__(self, fh):
        self.fh = fh
        self.count = 0

    def __call__(self, rec: ProgressRecord) -> None:
        self.fh.write(f"{rec.epoch},{rec.index},{rec.sample_id},{rec.loss:.9g}\n")
        self.count += 1


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SALICON_THREADS", "1")))
    except ValueError:
        return 1


def _index_dir(directory: Path) -> dict[str, Path]:
    found: dict[str, Path] = {}
    for path in sorted(directory.iterdir()):
        if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES:
            if path.stem in found:
                log.warning("skipping %s: %s already provides id %r", path, found[path.stem].name, path.stem)
                continue
            found[path.stem] = path
    return found


def build_dataset(images_dir, fixations_dir, cfg: imaging.PreprocConfig = imaging.PreprocConfig(),
                  loss_hw=(38, 50), workers: int | None = None) -> list[FixationSample]:
    """Pair images with fixation maps by file stem and preprocess them all.

    Unmatched files are logged and skipped. Samples are ordered by id.
    """
    images_dir, fixations_dir = Path(images_dir), Path(fixations_dir)
    for d in (images_dir, fixations_dir):
        if not d.is_dir():
            raise DatasetError(f"not a directory: {d}")
    images = _index_dir(images_dir)
    fixations = _index_dir(fixations_dir)
    for stem in sorted(set(images) - set(fixations)):
        log.warning("skipping image %s: no fixation map named %r", images[stem].name, stem)
    for stem in sorted(set(fixations) - set(images)):
        log.warning("skipping fixation map %s: no image named %r", fixations[stem].name, stem)
    ids = sorted(set(images) & set(fixations))
    if not ids:
        raise DatasetError(f"no matching image/fixation pairs in {images_dir} and {fixations_dir}")

    def load_one(sample_id):
        fine, coarse = imaging.preprocess(imaging.decode_image(images[sample_id]), cfg)
        target = imaging.load_fixation_map(fixations[sample_id], loss_hw)
        return FixationSample(sample_id, fine, coarse, target)

    workers = workers or worker_count()
    if workers == 1:
        return [load_one(i) for i in ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(load_one, ids))


def split(samples, train_fraction: float, seed: int):
    """Seeded shuffle, then a prefix/suffix split into (train_ids, test_ids)."""
    ids = [s.id if isinstance(s, FixationSample) else s for s in samples]
    if not ids:
        raise DatasetError("cannot split an empty dataset")
    if not 0 < train_fraction <= 1:
        raise ConfigError(f"train_fraction must be in (0, 1], got {train_fraction}")
    n_train = math.floor(train_fraction * len(ids) + 1e-9)
    if n_train < 1:
        raise ConfigError(f"train_fraction {train_fraction} leaves no training samples out of {len(ids)}")
    perm = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    return shuffled[:n_train], shuffled[n_train:]


def _param_schedule(net):
    """(param key, lr_mult, decay_mult) for every parameter that learns."""
    sched = []
    for lay in net.spec.layers:
        if lay.kind != "conv":
            continue
        for key, lr, decay in ((weight_name(lay.name), lay.lr_mult, lay.decay_mult),
                               (bias_name(lay.name), lay.lr_mult_bias, lay.decay_mult_bias)):
            if lr > 0:
                sched.append((key, lr, decay))
    return sched


def sgd_step(w, v, g, lr: float, momentum: float, decay: float) -> None:
    """One in-place momentum-SGD update with L2 weight decay."""
    dt = w.dtype.type
    step = g + dt(decay) * w if decay else g
    v *= dt(momentum)
    v -= dt(lr) * step
    w += v


def _snapshot(net, cfg, note):
    store = net.weight_store()
    store.metadata["note"] = note
    if cfg.snapshot_path:
        save(store, cfg.snapshot_path)
    return store


def train(net, samples, cfg: SolverConfig, progress_sink: Callable[[ProgressRecord], None] | None = None):
    """Fine-tune ``net`` in place until the budget runs out.

    Returns the final parameters as a WeightStore (also written to
    ``cfg.snapshot_path`` when set). Raises DivergenceError on a non-finite
    loss, after writing the pre-divergence weights.
    """
    if not net.spec.loss_layers:
        raise StateError("training needs a network built from a training spec (no loss layer found)")
    net.interp_backward_mode = cfg.interp_backward_mode
    train_ids, test_ids = split(samples, cfg.train_fraction, cfg.rng_seed)
    by_id = {s.id: s for s in samples}
    log.info("training on %d samples, %d held out", len(train_ids), len(test_ids))

    sched = _param_schedule(net)
    velocity = {key: np.zeros_like(net.params[key]) for key, _, _ in sched}
    rng = np.random.default_rng([cfg.rng_seed, 1])
    deadline = time.monotonic() + cfg.time_budget
    updates = epoch = 0
    last_loss = float("nan")

    def budget_left():
        if cfg.max_updates is not None:
            return updates < cfg.max_updates
        return time.monotonic() < deadline

    try:
        while budget_left():
            order = rng.permutation(len(train_ids))
            for index, k in enumerate(order):
                if not budget_left():
                    break
                s = by_id[train_ids[k]]
                net.forward({"fine_scale": s.fine, "coarse_scale": s.coarse, "ground_truth": s.target},
                            keep="backward")
                loss = net.loss
                if not math.isfinite(loss):
                    raise DivergenceError(
                        f"non-finite loss {loss} at epoch {epoch}, sample {index} ({s.id!r})",
                        epoch=epoch, index=index, sample_id=s.id,
                    )
                net.backward()
                for key, lr_mult, decay_mult in sched:
                    sgd_step(net.params[key], velocity[key], net.gradients[key],
                             cfg.base_lr * lr_mult, cfg.momentum, cfg.weight_decay * decay_mult)
                updates += 1
                last_loss = loss
                if progress_sink is not None:
                    progress_sink(ProgressRecord(epoch, index, s.id, loss))
            epoch += 1
    except DivergenceError:
        _snapshot(net, cfg, "pre-divergence snapshot")
        raise

    store = _snapshot(net, cfg, "trained")
    store.metadata.update(updates=updates, epochs=epoch, last_loss=last_loss,
                          train_ids=train_ids, test_ids=test_ids)
    return store


def write_run_metadata(path, cfg: SolverConfig, **extra) -> None:
    record = {"solver": asdict(cfg), **extra}
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n")

"""Deterministic unsupervised training loop.

Every random draw is derived functionally from the seed: epoch e's
shuffle comes from SeedSequence(seed, spawn_key=(0, e)) and step s's
crop offsets from SeedSequence(seed, spawn_key=(1, s)). Nothing depends
on accumulated RNG state, so resuming from a checkpoint at step N
replays the exact draw sequence a fresh run would have made — train N
then resume M is bit-identical to train N+M.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import enhancer
from .checkpoint import config_digest, load_checkpoint, save_checkpoint
from .enhancer import EnhancerConfig
from .errors import ConfigDigestMismatch, DivergedLoss, EmptyDataset
from .imageio import load_image, to_unit_tensor
from .losses import LossWeights, loss_total
from .optim import ParamStore, adamw_step

IMAGE_SUFFIXES = {".png", ".ppm"}


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-5
    weight_decay: float = 1e-4
    batch_size: int = 8
    max_iterations: int = 1000
    checkpoint_every: int = 200
    seed: int = 0
    crop_size: int = 256
    exposure: float = 0.6
    chroma_on_factors: bool = True
    weights: LossWeights = field(default_factory=LossWeights)
    enhancer: EnhancerConfig = field(default_factory=EnhancerConfig)

    def __post_init__(self):
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive and weight_decay nonnegative")
        if self.batch_size < 1 or self.crop_size < 1:
            raise ValueError("batch_size and crop_size must be >= 1")
        if self.checkpoint_every < 1:
            raise ValueError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be >= 0, got {self.max_iterations}")

    def to_dict(self):
        d = self.trajectory_dict()
        d["max_iterations"] = self.max_iterations
        d["checkpoint_every"] = self.checkpoint_every
        return d

    def trajectory_dict(self):
        """The fields that shape the parameter trajectory. Changing any
        of them invalidates resume; max_iterations and checkpoint_every
        deliberately stay out so runs can be extended."""
        return {
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "crop_size": self.crop_size,
            "exposure": self.exposure,
            "chroma_on_factors": self.chroma_on_factors,
            "weights": {
                "alpha": self.weights.alpha,
                "beta": self.weights.beta,
                "gamma": self.weights.gamma,
                "delta1": self.weights.delta1,
                "delta2": self.weights.delta2,
            },
            "enhancer": self.enhancer.to_dict(),
        }

    def digest(self):
        return config_digest(self.trajectory_dict())

    @classmethod
    def from_dict(cls, d):
        kwargs = {k: d[k] for k in (
            "lr", "weight_decay", "batch_size", "max_iterations",
            "checkpoint_every", "seed", "crop_size", "exposure",
            "chroma_on_factors") if k in d}
        if "weights" in d:
            kwargs["weights"] = LossWeights(**d["weights"])
        if "enhancer" in d:
            kwargs["enhancer"] = EnhancerConfig.from_dict(d["enhancer"])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class DatasetIndex:
    """Sorted image paths with a deterministic shuffle per epoch."""

    def __init__(self, data_dir, seed):
        self.paths = sorted(
            p for p in Path(data_dir).iterdir()
            if p.suffix.lower() in IMAGE_SUFFIXES)
        if not self.paths:
            raise EmptyDataset(f"no loadable images in {data_dir}")
        self.seed = seed
        self._epoch = None
        self._order = None
        self._cache = {}

    def __len__(self):
        return len(self.paths)

    def epoch_order(self, epoch):
        if epoch != self._epoch:
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(0, epoch)))
            self._order = rng.permutation(len(self.paths))
            self._epoch = epoch
        return self._order

    def sample(self, index):
        """Image for flat sample index ``index`` of the shuffled stream,
        as a (3, H, W) float32 unit tensor."""
        epoch, pos = divmod(index, len(self.paths))
        path = self.paths[self.epoch_order(epoch)[pos]]
        tensor = self._cache.get(path)
        if tensor is None:
            tensor = to_unit_tensor(load_image(path))[0]
            self._cache[path] = tensor
        return tensor


def _reflect_to(img, size):
    # grow by reflection until both sides reach the crop size; looped
    # because a single reflect pad cannot exceed the current extent
    _, h, w = img.shape
    while h < size or w < size:
        ph = min(max(size - h, 0), h - 1) if h > 1 else max(size - h, 0)
        pw = min(max(size - w, 0), w - 1) if w > 1 else max(size - w, 0)
        mode = "reflect" if min(h, w) > 1 else "edge"
        img = np.pad(img, ((0, 0), (0, ph), (0, pw)), mode=mode)
        _, h, w = img.shape
    return img


def _crop_batch(dataset, config, step):
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1, step)))
    cs = config.crop_size
    items = []
    for j in range(config.batch_size):
        img = dataset.sample(step * config.batch_size + j)
        img = _reflect_to(img, cs)
        _, h, w = img.shape
        r = int(rng.integers(0, h - cs + 1))
        c = int(rng.integers(0, w - cs + 1))
        items.append(img[:, r : r + cs, c : c + cs])
    return np.stack(items)


def _checkpoint_path(out_dir, step):
    return Path(out_dir) / f"checkpoint_{step:06d}.ckpt"


def _run(store, config, dataset, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config.digest()
    blob = config.to_dict()
    log_path = out_dir / "train_log.jsonl"

    if store.step_count > config.max_iterations:
        raise ValueError(
            f"checkpoint is already at step {store.step_count}, beyond "
            f"max_iterations={config.max_iterations}")
    last_path = _checkpoint_path(out_dir, store.step_count)
    if store.step_count == config.max_iterations:
        save_checkpoint(last_path, store, digest, blob)
        return last_path

    with open(log_path, "a") as log:
        while store.step_count < config.max_iterations:
            step = store.step_count  # 0-based draw index for this step
            batch = _crop_batch(dataset, config, step)
            x = ad.constant(batch)
            trace = enhancer.forward(x, store, config.enhancer)
            total, report = loss_total(
                x, trace, config.weights, config.exposure, config.chroma_on_factors)
            if not np.isfinite(report.total):
                save_checkpoint(out_dir / "checkpoint_diverged_lastgood.ckpt",
                                store, digest, blob)
                raise DivergedLoss(
                    f"total loss {report.total} at step {store.step_count + 1}; "
                    f"last good state saved")
            ad.backward(total)
            adamw_step(store, config.lr, weight_decay=config.weight_decay)
            store.zero_grad()
            log.write(report.json_line(store.step_count) + "\n")

            done = store.step_count
            if done % config.checkpoint_every == 0 or done == config.max_iterations:
                last_path = _checkpoint_path(out_dir, done)
                save_checkpoint(last_path, store, digest, blob)
    return last_path


def train(config, data_dir, out_dir):
    """Fresh training run; returns the final checkpoint path."""
    dataset = DatasetIndex(data_dir, config.seed)
    store = ParamStore()
    enhancer.init_params(store, config.enhancer)
    return _run(store, config, dataset, out_dir)


def resume(checkpoint_path, config, data_dir, out_dir):
    """Continue a run from a checkpoint; the trajectory-relevant part of
    ``config`` must hash to the digest stored in the file."""
    store, meta = load_checkpoint(checkpoint_path)
    if meta["digest"] != config.digest():
        raise ConfigDigestMismatch(
            f"{checkpoint_path} was produced under a different training "
            f"configuration; refusing to resume")
    dataset = DatasetIndex(data_dir, config.seed)
    return _run(store, config, dataset, out_dir)

"""Seeded synthetic attribute benchmark.

Class prototypes are drawn uniformly from ``[0, 1]^K``.  A fixed Gaussian
generator matrix ``G`` maps a prototype to ``N_v * d_raw`` raw patch values,
so every image is ``reshape(a_c G) + noise``.  The link between attributes
and pixels is linear, which makes transfer to unseen classes learnable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .numerics import SplitMix64
from .numerics.aent import read_aent, write_aent


class UnseenAccessError(RuntimeError):
    """Raised when training code asks for an image of an unseen class."""


@dataclass
class ZslDataset:
    prototypes: np.ndarray
    seen_mask: np.ndarray
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    generator: np.ndarray

    def __post_init__(self):
        self.seen_mask = np.asarray(self.seen_mask, dtype=bool)
        if self.seen_mask.all() or not self.seen_mask.any():
            raise ValueError("need at least one seen and one unseen class")
        if self.train_y.size and not self.seen_mask[self.train_y].all():
            raise ValueError("training split contains unseen-class samples")

    @property
    def num_classes(self) -> int:
        return self.prototypes.shape[0]

    @property
    def seen_classes(self) -> list[int]:
        return np.flatnonzero(self.seen_mask).tolist()

    @property
    def unseen_classes(self) -> list[int]:
        return np.flatnonzero(~self.seen_mask).tolist()

    def training_view(self) -> "TrainingView":
        return TrainingView(self)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.prototypes, self.seen_mask, self.train_x, self.train_y, self.test_x, self.test_y, self.generator):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in ("prototypes", "train_x", "test_x", "generator"):
            write_aent(d / f"{name}.aent", getattr(self, name))
        meta = {
            "seen": self.seen_mask.tolist(),
            "train_labels": self.train_y.tolist(),
            "test_labels": self.test_y.tolist(),
        }
        (d / "dataset.json").write_text(json.dumps(meta, indent=1))

    @classmethod
    def load(cls, directory) -> "ZslDataset":
        d = Path(directory)
        meta = json.loads((d / "dataset.json").read_text())
        return cls(
            prototypes=read_aent(d / "prototypes.aent"),
            seen_mask=np.array(meta["seen"], dtype=bool),
            train_x=read_aent(d / "train_x.aent"),
            train_y=np.array(meta["train_labels"], dtype=np.int64),
            test_x=read_aent(d / "test_x.aent"),
            test_y=np.array(meta["test_labels"], dtype=np.int64),
            generator=read_aent(d / "generator.aent"),
        )


@dataclass
class TrainingView:
    """Training-time access to a dataset.

    Every read goes through :meth:`batch`, which refuses unseen-class images
    and records which labels were handed out.
    """

    dataset: ZslDataset
    labels_read: set[int] = field(default_factory=set)

    def __len__(self) -> int:
        return len(self.dataset.train_y)

    def batch(self, indices) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(indices, dtype=np.intp)
        y = self.dataset.train_y[idx]
        if not self.dataset.seen_mask[y].all():
            raise UnseenAccessError("training step requested an unseen-class image")
        self.labels_read.update(y.tolist())
        return self.dataset.train_x[idx], y

    def prototypes(self) -> np.ndarray:
        """All class prototypes; unseen rows are only meant for the debiasing term."""
        return self.dataset.prototypes


def generate_dataset(cfg: RunConfig, rng: SplitMix64 | None = None) -> ZslDataset:
    if rng is None:
        rng = SplitMix64(cfg.seed).substream("data")
    C, K = cfg.num_classes, cfg.num_attributes
    n_v, d_raw = cfg.num_visual_tokens, cfg.raw_patch_dim
    if not 1 <= cfg.num_seen < C:
        raise ValueError(f"seen count {cfg.num_seen} must be in [1, {C})")

    prototypes = rng.uniform((C, K))
    generator = rng.normal((K, n_v * d_raw), std=1.0 / math.sqrt(K))
    seen_mask = np.zeros(C, dtype=bool)
    seen_mask[rng.permutation(C)[: cfg.num_seen]] = True

    n_train = cfg.samples_per_class - cfg.test_per_class
    train_x, train_y, test_x, test_y = [], [], [], []
    for c in range(C):
        n = cfg.samples_per_class if seen_mask[c] else cfg.test_per_class
        clean = prototypes[c] @ generator
        noise = rng.normal((n, n_v * d_raw), std=cfg.noise_std) if cfg.noise_std > 0 else np.zeros((n, n_v * d_raw))
        images = (clean + noise).reshape(n, n_v, d_raw)
        if seen_mask[c]:
            train_x.append(images[:n_train])
            train_y += [c] * n_train
            test_x.append(images[n_train:])
        else:
            test_x.append(images)
        test_y += [c] * cfg.test_per_class

    return ZslDataset(
        prototypes=prototypes,
        seen_mask=seen_mask,
        train_x=np.concatenate(train_x),
        train_y=np.array(train_y, dtype=np.int64),
        test_x=np.concatenate(test_x),
        test_y=np.array(test_y, dtype=np.int64),
        generator=generator,
    )

"""Synthetic two-group, two-class Gaussian scenarios.

Groups sit at x = -0.5 (M) and x = +0.5 (F); within each group the two classes
are separated vertically by +-0.35. The label rule is mirrored between groups,
so a model has to infer group membership from position. Difficulty for F is
raised either by flipping a fraction of its training labels or by rotating its
class axis about the F group center.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import RangeError, SchemaError, UsageError
from .rng import SplitMix64, derive_seed

M, F = 0, 1
GROUP_TAGS = ("M", "F")

GROUP_OFFSET = 0.5
CLASS_OFFSET = 0.35
MAX_ROTATION = 45.0

CSV_HEADER = ["x1", "x2", "group", "clean_label", "observed_label"]


class Variant(str, Enum):
    LABEL_NOISE = "LabelNoise"
    ROTATED_BOUNDARY = "RotatedBoundary"


@dataclass(frozen=True)
class CenterLayout:
    """Center of each (group, class) cell, indexed ``centers[group][cls]``."""

    centers: tuple

    def __getitem__(self, key):
        group, cls = key
        return self.centers[group][cls]

    def as_array(self) -> np.ndarray:
        return np.array(self.centers, dtype=np.float64)


def build_centers(variant: Variant | str, rotation_deg: float = 0.0) -> CenterLayout:
    variant = Variant(variant)
    if not 0.0 <= rotation_deg <= MAX_ROTATION:
        raise RangeError(f"rotation_deg={rotation_deg} outside [0, {MAX_ROTATION}]", "synthgen")
    if variant is Variant.LABEL_NOISE and rotation_deg != 0:
        raise RangeError("LabelNoise scenarios take no rotation", "synthgen")
    m0 = (-GROUP_OFFSET, -CLASS_OFFSET)
    m1 = (-GROUP_OFFSET, CLASS_OFFSET)
    theta = math.radians(rotation_deg)
    c, s = math.cos(theta), math.sin(theta)

    def rotated(dx, dy):
        return (GROUP_OFFSET + dx * c - dy * s, dx * s + dy * c)

    f0 = rotated(0.0, CLASS_OFFSET)
    f1 = rotated(0.0, -CLASS_OFFSET)
    return CenterLayout(((m0, m1), (f0, f1)))


@dataclass(frozen=True)
class ScenarioConfig:
    variant: Variant = Variant.LABEL_NOISE
    sigma: float = 0.2
    ratio_m: float = 0.5
    noise_fraction: float = 0.0
    rotation_deg: float = 0.0
    n_train: int = 1000
    n_test_per_cell: int = 2500
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.sigma < 0:
            raise RangeError(f"sigma={self.sigma} must be >= 0", "synthgen")
        if not 0.0 <= self.ratio_m <= 1.0:
            raise RangeError(f"ratio_m={self.ratio_m} outside [0, 1]", "synthgen")
        if not 0.0 <= self.noise_fraction <= 0.5:
            raise RangeError(f"noise_fraction={self.noise_fraction} outside [0, 0.5]", "synthgen")
        if self.variant is Variant.ROTATED_BOUNDARY and self.noise_fraction:
            raise RangeError("RotatedBoundary scenarios take no label noise", "synthgen")
        build_centers(self.variant, self.rotation_deg)
        if self.n_train < 0:
            raise RangeError(f"n_train={self.n_train} must be >= 0", "synthgen")

    @property
    def centers(self) -> CenterLayout:
        return build_centers(self.variant, self.rotation_deg)

    @property
    def difficulty(self) -> float:
        if self.variant is Variant.LABEL_NOISE:
            return self.noise_fraction
        return self.rotation_deg

    def group_counts(self) -> tuple[int, int]:
        n_m = math.floor(self.ratio_m * self.n_train + 0.5)
        return n_m, self.n_train - n_m


@dataclass
class Dataset:
    x: np.ndarray
    group: np.ndarray
    clean_label: np.ndarray
    observed_label: np.ndarray
    split: str = "train"
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.group)

    def cell_counts(self) -> dict:
        """Row count per (group tag, clean class)."""
        return {
            (GROUP_TAGS[g], c): int(np.sum((self.group == g) & (self.clean_label == c)))
            for g in (M, F)
            for c in (0, 1)
        }

    def n_flipped(self, group: int | None = None) -> int:
        mask = self.observed_label != self.clean_label
        if group is not None:
            mask &= self.group == group
        return int(mask.sum())

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.split == other.split
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.group, other.group)
            and np.array_equal(self.clean_label, other.clean_label)
            and np.array_equal(self.observed_label, other.observed_label)
        )

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())

    def to_csv_text(self) -> str:
        lines = [",".join(CSV_HEADER)]
        for (x1, x2), g, c, o in zip(self.x.tolist(), self.group, self.clean_label, self.observed_label):
            lines.append(f"{x1:.9g},{x2:.9g},{GROUP_TAGS[g]},{c},{o}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, path, split: str = "train") -> "Dataset":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_HEADER:
                raise SchemaError(f"{path}: expected header {CSV_HEADER}, got {header}", "synthgen")
            rows = list(reader)
        x = np.array([[float(r[0]), float(r[1])] for r in rows], dtype=np.float64).reshape(-1, 2)
        group = np.array([GROUP_TAGS.index(r[2]) for r in rows], dtype=np.int8)
        clean = np.array([int(r[3]) for r in rows], dtype=np.int8)
        observed = np.array([int(r[4]) for r in rows], dtype=np.int8)
        return cls(x, group, clean, observed, split)


def _sample_cells(config: ScenarioConfig, seed: int, counts: dict, split: str) -> Dataset:
    # One noise stream per class, read from the start by both groups: F rows
    # take the negated draws of M rows (antithetic pairing), so each cell is
    # still an exact Gaussian but the symmetric scenario is mirror-symmetric
    # sample by sample. Growing a group only appends rows, so neighbouring
    # ratios share most of their samples.
    centers = config.centers
    streams = {}
    for c in (0, 1):
        n = max(counts[M, c], counts[F, c])
        streams[c] = SplitMix64(derive_seed(seed, ["class", c])).normal(2 * n).reshape(n, 2)
    xs, groups, labels = [], [], []
    for g, sign in ((M, 1.0), (F, -1.0)):
        for c in (0, 1):
            n = counts[g, c]
            xs.append(np.asarray(centers[g, c]) + sign * config.sigma * streams[c][:n])
            groups.append(np.full(n, g, dtype=np.int8))
            labels.append(np.full(n, c, dtype=np.int8))
    x = np.concatenate(xs).reshape(-1, 2)
    group = np.concatenate(groups)
    clean = np.concatenate(labels)
    return Dataset(x, group, clean, clean.copy(), split)


def sample_dataset(config: ScenarioConfig, seed: int | None = None) -> Dataset:
    """Class-balanced training split; group sizes follow ``config.ratio_m``."""
    seed = config.seed if seed is None else seed
    counts = {}
    for g, n_g in zip((M, F), config.group_counts()):
        counts[g, 0] = n_g // 2
        counts[g, 1] = n_g - n_g // 2
    return _sample_cells(config, seed, counts, "train")


def sample_testset(config: ScenarioConfig, seed: int | None = None) -> Dataset:
    if config.n_test_per_cell < 1:
        raise UsageError("n_test_per_cell must be >= 1", "synthgen")
    seed = config.seed if seed is None else seed
    counts = {(g, c): config.n_test_per_cell for g in (M, F) for c in (0, 1)}
    return _sample_cells(config, seed, counts, "test")


def flip_labels(dataset: Dataset, target_group: int | str, fraction: float, seed: int) -> Dataset:
    """Flip the observed label of round(fraction * n_group) rows of one group."""
    if dataset.split != "train":
        raise UsageError("label noise applies to training splits only", "synthgen")
    if not 0.0 <= fraction <= 1.0:
        raise RangeError(f"fraction={fraction} outside [0, 1]", "synthgen")
    if isinstance(target_group, str):
        target_group = GROUP_TAGS.index(target_group)
    rows = np.flatnonzero(dataset.group == target_group)
    n_flip = math.floor(fraction * len(rows) + 0.5)
    chosen = rows[SplitMix64(seed).permutation(len(rows))[:n_flip]]
    observed = dataset.observed_label.copy()
    observed[chosen] = 1 - dataset.clean_label[chosen]
    return replace(dataset, observed_label=observed)


def make_train_set(config: ScenarioConfig, seed: int | None = None) -> Dataset:
    """Sample the training split and apply the scenario's F-group label noise."""
    seed = config.seed if seed is None else seed
    data = sample_dataset(config, seed)
    if config.variant is Variant.LABEL_NOISE and config.noise_fraction > 0:
        data = flip_labels(data, F, config.noise_fraction, derive_seed(seed, ["flip"]))
    return data

"""Model pools, subset draws, and soft-vote evaluation over ensemble sizes."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError, UsageError
from .rng import SplitMix64, derive_seed
from .synthgen import F, M
from .tinynet import forward


@dataclass
class EnsemblePool:
    models: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.models:
            raise UsageError("pool needs at least one model", "ensemble")

    def __len__(self):
        return len(self.models)

    def probabilities(self, features) -> np.ndarray:
        """Member probabilities, shape (pool_size, n_rows)."""
        return np.stack([forward(m, features) for m in self.models])


@dataclass(frozen=True)
class DrawPlan:
    k: int
    subsets: np.ndarray  # (n_subsets, k), ascending indices per row
    n_draws: int
    seed: int
    exhaustive: bool


def draw_subsets(pool_size: int, k: int, n_draws: int, seed: int) -> DrawPlan:
    """Enumerate all k-subsets when there are at most ``n_draws``, else sample ``n_draws``."""
    if not 1 <= k <= pool_size:
        raise RangeError(f"k={k} outside [1, {pool_size}]", "ensemble")
    if n_draws < 1:
        raise RangeError("n_draws must be >= 1", "ensemble")
    if math.comb(pool_size, k) <= n_draws:
        subsets = np.array(list(itertools.combinations(range(pool_size), k)), dtype=np.int64)
        return DrawPlan(k, subsets, n_draws, seed, True)
    rng = SplitMix64(seed)
    subsets = np.stack([rng.choice(pool_size, k) for _ in range(n_draws)])
    return DrawPlan(k, subsets, n_draws, seed, False)


def aggregate(members, features=None) -> np.ndarray:
    """Soft vote: mean of member probabilities.

    ``members`` is either a list of ModelParams (then ``features`` is required)
    or an array of member probabilities with members on axis 0.
    """
    if len(members) == 0:
        raise UsageError("cannot aggregate an empty member list", "ensemble")
    if features is not None:
        probs = np.stack([forward(m, features) for m in members])
    else:
        probs = np.asarray(members, dtype=np.float64)
    total = probs[0].copy()
    for p in probs[1:]:
        total += p
    return total / len(probs)


@dataclass(frozen=True)
class CurvePoint:
    k: int
    acc_m: float
    acc_f: float
    acc_overall: float
    n_m: int
    n_f: int
    n_draws: int


def _draw_accuracies(probs, subsets, correct_label, masks):
    total = probs[subsets[:, 0]].copy()
    for j in range(1, subsets.shape[1]):
        total += probs[subsets[:, j]]
    correct = (total / subsets.shape[1] >= 0.5) == correct_label
    return [correct[:, mask].sum(axis=1) / mask.sum() for mask in masks]


def evaluate_curve(pool: EnsemblePool, test_set, sizes=None, n_draws: int = 500, seed: int = 0,
                   probs: np.ndarray | None = None) -> list[CurvePoint]:
    """Mean per-group test accuracy of soft-vote ensembles for each size k."""
    if probs is None:
        probs = pool.probabilities(test_set.x)
    size = probs.shape[0]
    sizes = range(1, size + 1) if sizes is None else sizes
    masks = [test_set.group == M, test_set.group == F]
    n_m, n_f = int(masks[0].sum()), int(masks[1].sum())
    if not n_m or not n_f:
        raise UsageError("test set must contain both groups", "ensemble")
    label = test_set.clean_label.astype(bool)
    points = []
    for k in sizes:
        plan = draw_subsets(size, k, n_draws, derive_seed(seed, [k]))
        acc_m, acc_f = (float(np.mean(a)) for a in _draw_accuracies(probs, plan.subsets, label, masks))
        overall = (acc_m + acc_f) / 2 if n_m == n_f else (n_m * acc_m + n_f * acc_f) / (n_m + n_f)
        points.append(CurvePoint(k, acc_m, acc_f, overall, n_m, n_f, len(plan.subsets)))
    return points

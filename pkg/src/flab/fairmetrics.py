"""Per-group accuracy, gap, relative improvement and balance-ratio optima.

Accuracies are fractions in [0, 1]; gaps are accuracy points (x100);
relative improvements are percentages against the k=1 baseline.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import RangeError, UsageError
from .synthgen import F, GROUP_TAGS, M


@dataclass(frozen=True)
class GroupMetrics:
    acc_m: float
    acc_f: float
    acc_overall: float
    n_m: int
    n_f: int

    @classmethod
    def from_accuracies(cls, acc_m, acc_f, n_m, n_f):
        if n_m == n_f:
            overall = (acc_m + acc_f) / 2
        else:
            overall = (n_m * acc_m + n_f * acc_f) / (n_m + n_f)
        return cls(acc_m, acc_f, overall, n_m, n_f)


@dataclass(frozen=True)
class GapReport:
    abs_gap: float
    benefited: str | None


@dataclass(frozen=True)
class MetricsRecord:
    variant: str
    difficulty: float
    ratio_m: float
    fold: int
    k: int
    acc_m: float
    acc_f: float
    acc_overall: float
    gap_abs: float
    benefited: str | None
    rel_imp_m: float
    rel_imp_f: float
    n_draws: int

    @property
    def key(self):
        return (self.variant, self.difficulty, self.ratio_m, self.fold, self.k)


def group_accuracy(predictions, test_set) -> GroupMetrics:
    predictions = np.asarray(predictions)
    if len(predictions) != len(test_set):
        raise UsageError("predictions and test rows differ in length", "fairmetrics")
    correct = predictions == test_set.clean_label
    accs, counts = [], []
    for g in (M, F):
        mask = test_set.group == g
        if not mask.any():
            raise UsageError(f"group {GROUP_TAGS[g]} absent from test set", "fairmetrics")
        accs.append(float(correct[mask].mean()))
        counts.append(int(mask.sum()))
    return GroupMetrics.from_accuracies(accs[0], accs[1], counts[0], counts[1])


def gap(metrics) -> GapReport:
    diff = metrics.acc_m - metrics.acc_f
    if diff == 0:
        return GapReport(0.0, None)
    return GapReport(abs(diff) * 100.0, "M" if diff > 0 else "F")


def relative_improvement(acc_at_k: float, acc_at_1: float) -> float:
    if acc_at_1 == 0:
        raise RangeError("relative improvement undefined for a zero baseline", "fairmetrics")
    return 100.0 * (acc_at_k - acc_at_1) / acc_at_1


def curve_records(points, variant, difficulty, ratio_m, fold, decimals=6) -> list[MetricsRecord]:
    """Turn an ensemble-size curve into records; k=1 is the relative-improvement baseline."""
    base = next((p for p in points if p.k == 1), None)
    if base is None:
        raise UsageError("curve lacks the k=1 baseline", "fairmetrics")
    out = []
    for p in points:
        g = gap(p)
        if p.k == 1:
            rel_m = rel_f = 0.0
        else:
            rel_m = relative_improvement(p.acc_m, base.acc_m) if base.acc_m else float("nan")
            rel_f = relative_improvement(p.acc_f, base.acc_f) if base.acc_f else float("nan")
        out.append(MetricsRecord(
            str(variant), round(float(difficulty), decimals), round(float(ratio_m), decimals), int(fold), int(p.k),
            round(p.acc_m, decimals), round(p.acc_f, decimals), round(p.acc_overall, decimals),
            round(g.abs_gap, decimals), g.benefited, round(rel_m, decimals), round(rel_f, decimals), p.n_draws,
        ))
    return out


def positive_sum(curve, K: int) -> bool:
    """Gap strictly shrinks from k=1 to k=K and neither group loses accuracy."""
    by_k = {r.k: r for r in curve}
    if 1 not in by_k or K not in by_k:
        raise UsageError(f"curve must contain k=1 and k={K}", "fairmetrics")
    first, last = by_k[1], by_k[K]
    return last.gap_abs < first.gap_abs and last.acc_m >= first.acc_m and last.acc_f >= first.acc_f


@dataclass(frozen=True)
class OptimalRatio:
    ratio_max_overall: float
    ratio_min_gap: float
    coincide: bool


def ratio_means(records) -> dict:
    """Fold-averaged (acc_overall, gap_abs) per ratio, ignoring duplicate records."""
    unique = {}
    for r in records:
        unique.setdefault(r.key, r)
    if len({(v, d, k) for v, d, _, _, k in unique}) > 1:
        raise UsageError("records must share one variant, difficulty and k", "fairmetrics")
    per_ratio = defaultdict(list)
    for key in sorted(unique):
        per_ratio[key[2]].append(unique[key])
    return {
        ratio: (float(np.mean([r.acc_overall for r in rs])), float(np.mean([r.gap_abs for r in rs])))
        for ratio, rs in sorted(per_ratio.items())
    }


def _pick(values: dict, sign: float) -> float:
    best = max(sign * v for v in values.values())
    tied = [r for r, v in values.items() if sign * v == best]
    return min(tied, key=lambda r: (abs(r - 0.5), r))


def optimal_ratio(records) -> OptimalRatio:
    records = list(records)
    if not records:
        raise UsageError("no records", "fairmetrics")
    means = ratio_means(records)
    if len(means) < 2:
        raise UsageError("need at least two ratios to locate an optimum", "fairmetrics")
    ratios = sorted(means)
    step = min(b - a for a, b in zip(ratios, ratios[1:]))
    best_acc = _pick({r: m[0] for r, m in means.items()}, 1.0)
    best_gap = _pick({r: m[1] for r, m in means.items()}, -1.0)
    return OptimalRatio(best_acc, best_gap, abs(best_acc - best_gap) <= step + 1e-9)

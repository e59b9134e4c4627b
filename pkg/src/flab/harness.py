"""Experiment grid orchestration, results persistence, and tabular ingestion.

Every work unit (difficulty, ratio, fold) is a pure function of the grid
config, so units run in any order or process and are merged by sorted key.
Seeds are derived per fold from the master seed and shared across ratios and
difficulties: neighbouring cells see the same sample streams, the same test
set and the same model initializations, which keeps cross-cell comparisons
free of resampling noise.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import EnsemblePool, evaluate_curve
from .errors import ParseError, SchemaError, TrainingError, UnsupportedDataError, UsageError
from .fairmetrics import MetricsRecord, curve_records
from .rng import SplitMix64, derive_seed
from .synthgen import Dataset, ScenarioConfig, Variant, make_train_set, sample_testset
from .tinynet import Architecture, Hyperparams, train_pool

log = logging.getLogger(__name__)

RESULTS_HEADER = [
    "variant", "difficulty", "ratio_m", "fold", "k", "acc_m", "acc_f", "acc_overall",
    "gap_abs", "benefited", "rel_imp_m", "rel_imp_f", "n_draws",
]
DEFAULT_L1 = {Variant.LABEL_NOISE: 0.0, Variant.ROTATED_BOUNDARY: 1e-3}


def _grid(stop, step):
    return [round(i * step, 10) for i in range(int(round(stop / step)) + 1)]


def default_difficulties(variant) -> list:
    if Variant(variant) is Variant.LABEL_NOISE:
        return _grid(0.5, 0.05)
    return _grid(45.0, 5.0)


@dataclass
class GridConfig:
    variant: str = Variant.LABEL_NOISE.value
    difficulties: list | None = None
    ratios: list = field(default_factory=lambda: _grid(1.0, 0.1))
    folds: int = 5
    pool_size: int = 20
    n_draws: int = 500
    sizes: list | None = None
    hyperparams: dict = field(default_factory=dict)
    widths: list = field(default_factory=lambda: [2, 16, 16, 1])
    n_train: int = 1000
    n_test_per_cell: int = 2500
    sigma: float = 0.2
    master_seed: int = 0
    output: str | None = None

    def __post_init__(self):
        self.variant = Variant(self.variant).value
        if self.difficulties is None:
            self.difficulties = default_difficulties(self.variant)
        if self.sizes is None:
            self.sizes = list(range(1, self.pool_size + 1))
        if not self.difficulties or not self.ratios or not self.sizes:
            raise UsageError("grids must be non-empty", "harness")
        if self.folds < 1 or self.pool_size < 1 or self.n_draws < 1:
            raise UsageError("folds, pool_size and n_draws must be positive", "harness")
        if 1 not in self.sizes or max(self.sizes) > self.pool_size:
            raise UsageError("sizes must include 1 and stay within the pool", "harness")
        unknown = set(self.hyperparams) - {f.name for f in dataclasses.fields(Hyperparams)}
        if unknown:
            raise SchemaError(f"unknown hyperparameter keys: {sorted(unknown)}", "harness")
        for d in self.difficulties:
            self.scenario(d, self.ratios[0])  # validates ranges early

    @classmethod
    def from_dict(cls, data: dict) -> "GridConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}", "harness")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "GridConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        data = self.to_dict()
        data.pop("output")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()

    @property
    def hyper(self) -> Hyperparams:
        params = {"l1_lambda": DEFAULT_L1[Variant(self.variant)], **self.hyperparams}
        return Hyperparams(**params)

    @property
    def arch(self) -> Architecture:
        return Architecture(tuple(self.widths))

    def scenario(self, difficulty, ratio_m) -> ScenarioConfig:
        knob = {"noise_fraction": difficulty} if Variant(self.variant) is Variant.LABEL_NOISE else {"rotation_deg": difficulty}
        return ScenarioConfig(
            variant=self.variant, sigma=self.sigma, ratio_m=ratio_m, n_train=self.n_train,
            n_test_per_cell=self.n_test_per_cell, seed=self.master_seed, **knob,
        )

    def units(self):
        return [(d, r, f) for d in self.difficulties for r in self.ratios for f in range(self.folds)]

    def expected_records(self) -> int:
        return len(self.units()) * len(self.sizes)


@dataclass
class Failure:
    difficulty: float
    ratio_m: float
    fold: int
    message: str
    n_missing: int


@dataclass
class ResultsTable:
    records: list
    manifest: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def __eq__(self, other):
        return isinstance(other, ResultsTable) and self.records == other.records

    def select(self, **where) -> list:
        return [r for r in self.records if all(getattr(r, k) == v for k, v in where.items())]


def fold_seeds(config: GridConfig, fold: int) -> dict:
    master, variant = config.master_seed, config.variant
    return {
        "train": derive_seed(master, [variant, "train", fold]),
        "test": derive_seed(master, [variant, "test", fold]),
        "draws": derive_seed(master, [variant, "draws", fold]),
        "models": [derive_seed(master, [variant, "model", fold, i]) for i in range(config.pool_size)],
    }


def run_cell(config: GridConfig, difficulty, ratio_m, fold) -> list[MetricsRecord]:
    """Train one pool for a (difficulty, ratio, fold) unit and evaluate its size curve."""
    seeds = fold_seeds(config, fold)
    scenario = config.scenario(difficulty, ratio_m)
    train_set = make_train_set(scenario, seeds["train"])
    test_set = sample_testset(scenario, seeds["test"])
    provenance = [
        {"difficulty": difficulty, "ratio_m": ratio_m, "fold": fold, "model": i, "seed": s}
        for i, s in enumerate(seeds["models"])
    ]
    models = train_pool(train_set, config.arch, config.hyper, seeds["models"], provenance)
    pool = EnsemblePool(models, {"difficulty": difficulty, "ratio_m": ratio_m, "fold": fold})
    curve = evaluate_curve(pool, test_set, config.sizes, config.n_draws, seeds["draws"])
    return curve_records(curve, config.variant, difficulty, ratio_m, fold)


def _run_unit(args):
    config, unit = args
    try:
        return unit, run_cell(config, *unit), None
    except TrainingError as exc:
        return unit, [], str(exc)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("FLAB_THREADS", "1"))
    return max(1, int(threads))


def run_grid(config: GridConfig, threads: int | None = None) -> ResultsTable:
    threads = resolve_threads(threads)
    started = time.time()
    units = config.units()
    jobs = [(config, u) for u in units]
    if threads == 1:
        outcomes = [_run_unit(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            outcomes = list(ex.map(_run_unit, jobs))
    records, failures = [], []
    for unit, recs, error in sorted(outcomes, key=lambda o: o[0]):
        if error is not None:
            log.warning("cell %s failed: %s", unit, error)
            failures.append(Failure(*unit, error, len(config.sizes)))
        records.extend(recs)
    records.sort(key=lambda r: (r.difficulty, r.ratio_m, r.fold, r.k))
    manifest = {
        "config_digest": config.digest(),
        "code_version": __version__,
        "platform": platform_tag(),
        "grid": {
            "variant": config.variant,
            "difficulties": len(config.difficulties),
            "ratios": len(config.ratios),
            "folds": config.folds,
            "pool_size": config.pool_size,
            "sizes": len(config.sizes),
        },
        "expected_records": config.expected_records(),
        "failures": [dataclasses.asdict(f) for f in failures],
        "started": started,
        "finished": time.time(),
    }
    return ResultsTable(records, manifest, failures)


def platform_tag() -> str:
    return f"{platform.system()}-{platform.machine()}-py{platform.python_version()}-numpy{np.__version__}"


def _fmt(v) -> str:
    return f"{v:.6f}"


def write_results(table: ResultsTable, path, manifest: bool = True) -> None:
    path = Path(path)
    lines = [",".join(RESULTS_HEADER)]
    for r in table.records:
        lines.append(",".join([
            r.variant, _fmt(r.difficulty), _fmt(r.ratio_m), str(r.fold), str(r.k),
            _fmt(r.acc_m), _fmt(r.acc_f), _fmt(r.acc_overall), _fmt(r.gap_abs),
            r.benefited or "none", _fmt(r.rel_imp_m), _fmt(r.rel_imp_f), str(r.n_draws),
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if manifest and table.manifest:
        manifest_path(path).write_text(json.dumps(table.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def read_results(path) -> ResultsTable:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if not lines or lines[0].split(",") != RESULTS_HEADER:
        raise SchemaError(f"{path}: header does not match {RESULTS_HEADER}", "harness")
    if not text.endswith("\n"):
        raise ParseError(f"truncated final row; last good line {len(lines) - 1}", len(lines))
    records = []
    for lineno, line in enumerate(lines[1:-1], start=2):
        fields = line.split(",")
        try:
            if len(fields) != len(RESULTS_HEADER):
                raise ValueError(f"expected {len(RESULTS_HEADER)} fields, got {len(fields)}")
            records.append(MetricsRecord(
                fields[0], float(fields[1]), float(fields[2]), int(fields[3]), int(fields[4]),
                float(fields[5]), float(fields[6]), float(fields[7]), float(fields[8]),
                None if fields[9] == "none" else fields[9], float(fields[10]), float(fields[11]), int(fields[12]),
            ))
        except ValueError as exc:
            raise ParseError(f"{exc}; last good line {lineno - 1}", lineno) from None
    manifest = {}
    if manifest_path(path).exists():
        manifest = json.loads(manifest_path(path).read_text(encoding="utf-8"))
    return ResultsTable(records, manifest)


def ingest_tabular(path, features, group, label, train_fraction=0.8, seed=0):
    """Load a CSV into train/test Datasets with a (group, class)-stratified split.

    The first group value encountered maps to M, the second to F.
    """
    if not 0.0 < train_fraction < 1.0:
        raise UsageError("train_fraction must lie in (0, 1)", "harness")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        missing = [c for c in [*features, group, label] if c not in columns]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}", "harness")
        rows = list(reader)
    group_values: list[str] = []
    for row in rows:
        if row[group] not in group_values:
            group_values.append(row[group])
    if len(group_values) != 2:
        raise UnsupportedDataError(f"need exactly two groups, found {group_values}", "harness")
    try:
        x = np.array([[float(row[c]) for c in features] for row in rows], dtype=np.float64)
        y = np.array([float(row[label]) for row in rows])
    except ValueError as exc:
        raise UnsupportedDataError(f"non-numeric value: {exc}", "harness") from None
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise UnsupportedDataError("label column must be binary 0/1", "harness")
    g = np.array([group_values.index(row[group]) for row in rows], dtype=np.int8)
    y = y.astype(np.int8)
    train_idx, test_idx = [], []
    for gi in (0, 1):
        for c in (0, 1):
            cell = np.flatnonzero((g == gi) & (y == c))
            order = cell[SplitMix64(derive_seed(seed, ["split", gi, c])).permutation(len(cell))]
            n_train = math.floor(train_fraction * len(cell) + 0.5)
            train_idx.append(order[:n_train])
            test_idx.append(order[n_train:])
    meta = {"groups": {"M": group_values[0], "F": group_values[1]}, "features": list(features)}

    def subset(idx, split):
        idx = np.sort(np.concatenate(idx))
        return Dataset(x[idx], g[idx], y[idx], y[idx].copy(), split, dict(meta))

    return subset(train_idx, "train"), subset(test_idx, "test")

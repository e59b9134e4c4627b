"""Command-line entry point: ``flab <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .errors import FlabError, SchemaError, UsageError

log = logging.getLogger("flab")

SUBCOMMANDS = ("gen", "sweep", "report", "gradcheck", "adapt")


@dataclasses.dataclass
class AdaptConfig:
    data: str
    features: list
    group: str
    label: str
    train_fraction: float = 0.8
    pool_size: int = 20
    n_draws: int = 500
    hyperparams: dict = dataclasses.field(default_factory=dict)
    widths: list | None = None
    master_seed: int = 0

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}", "cli")
        return cls(**data)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flab", description="Fairness of homogeneous deep ensembles, at desk scale.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="JSON config (grid config; adapt config for 'adapt')")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="master seed override (u64)")
    parser.add_argument("--threads", type=int, help="worker processes (falls back to FLAB_THREADS)")
    parser.add_argument("--results", help="results CSV to report on")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _grid_config(args):
    from .harness import GridConfig

    config = GridConfig.load(args.config) if args.config else GridConfig()
    if args.seed is not None:
        config.master_seed = args.seed
    return config


def _out_dir(args, config=None) -> Path:
    out = args.out or (config.output if config is not None and getattr(config, "output", None) else None)
    if out is None:
        raise UsageError("--out is required", "cli")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_gen(args) -> int:
    from .harness import fold_seeds
    from .synthgen import make_train_set, sample_testset

    config = _grid_config(args)
    out = _out_dir(args, config) / "datasets"
    out.mkdir(exist_ok=True)
    for d in config.difficulties:
        for fold in range(config.folds):
            seeds = fold_seeds(config, fold)
            sample_testset(config.scenario(d, config.ratios[0]), seeds["test"]).to_csv(
                out / f"{config.variant}_d{d:g}_f{fold}_test.csv")
            for r in config.ratios:
                make_train_set(config.scenario(d, r), seeds["train"]).to_csv(
                    out / f"{config.variant}_d{d:g}_r{r:g}_f{fold}_train.csv")
    print(f"wrote datasets to {out}")
    return 0


def cmd_sweep(args) -> int:
    from .harness import run_grid, write_results

    config = _grid_config(args)
    out = _out_dir(args, config)
    table = run_grid(config, args.threads)
    write_results(table, out / "results.csv")
    print(f"{len(table.records)} records, {len(table.failures)} failed cells -> {out / 'results.csv'}")
    return 1 if table.failures else 0


def cmd_report(args) -> int:
    from .harness import read_results
    from .report import build_report

    if not args.results:
        raise UsageError("--results is required for report", "cli")
    table = read_results(args.results)
    written = build_report(table).write(_out_dir(args))
    print(f"wrote {len(written)} files to {written[0].parent}")
    return 0


def cmd_gradcheck(args) -> int:
    from .tinynet import gradient_check

    worst = gradient_check(n_draws=100, seed=args.seed or 0)
    print(f"max relative error {worst:.3e} over 100 draws")
    return 0 if worst <= 1e-4 else 1


def cmd_adapt(args) -> int:
    from .ensemble import EnsemblePool, evaluate_curve
    from .fairmetrics import curve_records
    from .harness import ResultsTable, ingest_tabular, write_results
    from .rng import derive_seed
    from .tinynet import Architecture, Hyperparams, train_pool

    if not args.config:
        raise UsageError("--config is required for adapt", "cli")
    config = AdaptConfig.load(args.config)
    seed = config.master_seed if args.seed is None else args.seed
    out = _out_dir(args)
    train_set, test_set = ingest_tabular(config.data, config.features, config.group, config.label,
                                         config.train_fraction, derive_seed(seed, ["split"]))
    train_set.to_csv(out / "train.csv")
    test_set.to_csv(out / "test.csv")
    widths = config.widths or [len(config.features), 16, 16, 1]
    seeds = [derive_seed(seed, ["model", i]) for i in range(config.pool_size)]
    models = train_pool(train_set, Architecture(tuple(widths)), Hyperparams(**config.hyperparams), seeds)
    curve = evaluate_curve(EnsemblePool(models), test_set, None, config.n_draws, derive_seed(seed, ["draws"]))
    ratio_m = float((train_set.group == 0).mean())
    table = ResultsTable(curve_records(curve, "Tabular", 0.0, ratio_m, 0))
    write_results(table, out / "results.csv", manifest=False)
    first, last = table.records[0], table.records[-1]
    print(f"groups {train_set.meta['groups']}; gap k=1 {first.gap_abs:.3f} -> k={last.k} {last.gap_abs:.3f} points")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = globals()[f"cmd_{args.subcommand}"]
    try:
        return handler(args)
    except (FlabError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"flab {args.subcommand}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

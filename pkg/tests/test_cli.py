import json
import subprocess
import sys

import numpy as np
import pytest

from flab.cli import main

GRID = {"variant": "LabelNoise", "difficulties": [0.4], "ratios": [0.2], "folds": 1, "pool_size": 3,
        "n_draws": 5, "hyperparams": {"epochs": 2}, "n_train": 100, "n_test_per_cell": 30}


@pytest.fixture
def grid_config(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text(json.dumps(GRID))
    return path


def test_sweep_twice_is_identical(grid_config, tmp_path):
    assert main(["sweep", "--config", str(grid_config), "--out", str(tmp_path / "a")]) == 0
    assert main(["sweep", "--config", str(grid_config), "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_sweep_then_report(grid_config, tmp_path):
    main(["sweep", "--config", str(grid_config), "--out", str(tmp_path)])
    code = main(["report", "--results", str(tmp_path / "results.csv"), "--out", str(tmp_path / "rep")])
    assert code == 0
    names = [p.name for p in (tmp_path / "rep").iterdir()]
    assert sum(n.endswith(".svg") for n in names) == 3
    assert sum(n.endswith(".csv") for n in names) == 3
    assert "report.md" in names


def test_seed_flag_changes_results(grid_config, tmp_path):
    main(["sweep", "--config", str(grid_config), "--out", str(tmp_path / "a")])
    main(["sweep", "--config", str(grid_config), "--out", str(tmp_path / "b"), "--seed", "7"])
    assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "b" / "results.csv").read_bytes()


def test_gen_writes_datasets(grid_config, tmp_path):
    assert main(["gen", "--config", str(grid_config), "--out", str(tmp_path)]) == 0
    files = sorted(p.name for p in (tmp_path / "datasets").iterdir())
    assert files == ["LabelNoise_d0.4_f0_test.csv", "LabelNoise_d0.4_r0.2_f0_train.csv"]


def test_gradcheck_passes(capsys):
    assert main(["gradcheck"]) == 0
    assert "max relative error" in capsys.readouterr().out


def test_unknown_subcommand_is_usage_error():
    proc = subprocess.run([sys.executable, "-m", "flab.cli", "fit"], capture_output=True, text=True)
    assert proc.returncode != 0
    assert "invalid choice" in proc.stderr


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--colour", "red"])
    assert info.value.code != 0


def test_downstream_errors_are_tagged(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**GRID, "pool": 3}))
    assert main(["sweep", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "[harness]" in capsys.readouterr().err
    assert main(["report", "--results", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 1


def test_adapt_on_tabular_csv(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["age,income,sex,approved"]
    for _ in range(200):
        sex = "female" if rng.random() < 0.4 else "male"
        age, income = rng.normal(size=2)
        lines.append(f"{age:.4f},{income:.4f},{sex},{int(age + income > 0)}")
    data = tmp_path / "credit.csv"
    data.write_text("\n".join(lines) + "\n")
    cfg = tmp_path / "adapt.json"
    cfg.write_text(json.dumps({"data": str(data), "features": ["age", "income"], "group": "sex",
                               "label": "approved", "pool_size": 3, "n_draws": 5, "hyperparams": {"epochs": 5}}))
    assert main(["adapt", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    results = (tmp_path / "out" / "results.csv").read_text().splitlines()
    assert len(results) == 1 + 3

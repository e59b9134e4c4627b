import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flab.errors import RangeError, UsageError
from flab.synthgen import (
    F, M, Dataset, ScenarioConfig, Variant, build_centers, flip_labels, make_train_set,
    sample_dataset, sample_testset,
)


def test_default_layout_closed_under_negation():
    layout = build_centers(Variant.LABEL_NOISE, 0)
    assert layout[M, 0] == (-0.5, -0.35)
    assert layout[M, 1] == (-0.5, 0.35)
    assert layout[F, 0] == (0.5, 0.35)
    assert layout[F, 1] == (0.5, -0.35)
    for c in (0, 1):
        assert tuple(-v for v in layout[M, c]) == layout[F, c]
        assert layout[M, 0] != layout[M, 1]


def test_rotation_45_moves_f_centers_only():
    layout = build_centers(Variant.ROTATED_BOUNDARY, 45)
    # hand rotation of offset (0, -0.35) by 45 degrees about (0.5, 0)
    assert layout[F, 1] == pytest.approx((0.7474873734152916, -0.24748737341529164), abs=1e-12)
    assert layout[F, 0] == pytest.approx((0.2525126265847084, 0.24748737341529164), abs=1e-12)
    assert layout[M, 0] == (-0.5, -0.35)


@pytest.mark.parametrize("variant,angle", [(Variant.ROTATED_BOUNDARY, 90), (Variant.ROTATED_BOUNDARY, -1),
                                           (Variant.LABEL_NOISE, 10)])
def test_rotation_guards(variant, angle):
    with pytest.raises(RangeError):
        build_centers(variant, angle)


def test_balanced_counts():
    data = sample_dataset(ScenarioConfig(ratio_m=0.5, n_train=4000))
    assert set(data.cell_counts().values()) == {1000}


def test_fig1_counts():
    counts = sample_dataset(ScenarioConfig(ratio_m=0.2, n_train=4000)).cell_counts()
    assert counts == {("M", 0): 400, ("M", 1): 400, ("F", 0): 1600, ("F", 1): 1600}


def test_odd_group_gives_class_one_the_extra_row():
    counts = sample_dataset(ScenarioConfig(ratio_m=0.5, n_train=6)).cell_counts()
    assert counts[("M", 0)] == 1 and counts[("M", 1)] == 2


def test_sigma_zero_sits_on_centers():
    cfg = ScenarioConfig(sigma=0.0, ratio_m=0.3, n_train=50)
    data = sample_dataset(cfg)
    for i in range(len(data)):
        assert tuple(data.x[i]) == cfg.centers[data.group[i], data.clean_label[i]]


def test_testset_counts_and_determinism():
    cfg = ScenarioConfig(n_test_per_cell=1000)
    test = sample_testset(cfg, 8)
    assert len(test) == 4000
    assert int((test.group == M).sum()) == 2000
    assert np.array_equal(test.observed_label, test.clean_label)
    assert test == sample_testset(cfg, 8)
    with pytest.raises(UsageError):
        sample_testset(ScenarioConfig(n_test_per_cell=0), 8)


def test_flip_identity_and_full():
    data = sample_dataset(ScenarioConfig(n_train=300))
    assert flip_labels(data, F, 0.0, 1) == data
    full = flip_labels(data, "F", 1.0, 1)
    f = data.group == F
    assert np.array_equal(full.observed_label[f], 1 - data.clean_label[f])
    assert np.array_equal(full.observed_label[~f], data.observed_label[~f])
    assert np.array_equal(full.clean_label, data.clean_label)


def test_flip_fig1_count():
    data = sample_dataset(ScenarioConfig(ratio_m=0.2, n_train=4000))
    flipped = flip_labels(data, F, 0.4, 3)
    # count-check oracle: compare observed against clean row by row
    assert sum(o != c for o, c in zip(flipped.observed_label, flipped.clean_label)) == 1280
    assert flipped.n_flipped(M) == 0


@pytest.mark.parametrize("fraction", [i * 0.05 for i in range(11)])
def test_flip_count_exact_on_grid(fraction):
    data = sample_dataset(ScenarioConfig(ratio_m=0.3, n_train=1001))
    n_f = int((data.group == F).sum())
    assert flip_labels(data, F, fraction, 2).n_flipped() == math.floor(fraction * n_f + 0.5)


def test_flip_rejects_test_split():
    with pytest.raises(UsageError):
        flip_labels(sample_testset(ScenarioConfig(n_test_per_cell=5), 1), F, 0.1, 1)


@settings(max_examples=40, deadline=None)
@given(ratio=st.floats(0, 1), n=st.integers(0, 500), seed=st.integers(0, 2**64 - 1))
def test_class_balance_within_groups(ratio, n, seed):
    counts = sample_dataset(ScenarioConfig(ratio_m=ratio, n_train=n), seed).cell_counts()
    for g in ("M", "F"):
        assert abs(counts[g, 0] - counts[g, 1]) <= 1
    assert sum(counts.values()) == n


def test_negation_symmetry_of_mirrored_cells():
    cfg = ScenarioConfig(n_train=2000)
    data = sample_dataset(cfg, 4)
    n = 500
    for c in (0, 1):
        m = data.x[(data.group == M) & (data.clean_label == c)].mean(axis=0)
        f = data.x[(data.group == F) & (data.clean_label == c)].mean(axis=0)
        assert np.all(np.abs(-m - f) <= 4 * cfg.sigma / math.sqrt(n))


def test_each_cell_is_gaussian_at_its_center():
    cfg = ScenarioConfig(n_test_per_cell=20000, rotation_deg=30, variant="RotatedBoundary")
    test = sample_testset(cfg, 6)
    for g in (M, F):
        for c in (0, 1):
            pts = test.x[(test.group == g) & (test.clean_label == c)]
            assert np.allclose(pts.mean(axis=0), cfg.centers[g, c], atol=0.01)
            assert np.allclose(pts.std(axis=0), cfg.sigma, atol=0.01)


def test_determinism_and_csv_round_trip(tmp_path):
    cfg = ScenarioConfig(n_train=50, noise_fraction=0.3)
    a, b = make_train_set(cfg, 1), make_train_set(cfg, 1)
    assert a.to_csv_text() == b.to_csv_text()
    a.to_csv(tmp_path / "d.csv")
    text = (tmp_path / "d.csv").read_text()
    assert text.splitlines()[0] == "x1,x2,group,clean_label,observed_label"
    back = Dataset.from_csv(tmp_path / "d.csv")
    assert np.allclose(back.x, a.x, rtol=1e-8)
    assert np.array_equal(back.observed_label, a.observed_label)
    assert back.to_csv_text() == text


def test_nearby_ratios_share_samples():
    a = sample_dataset(ScenarioConfig(ratio_m=0.4, n_train=100), 3)
    b = sample_dataset(ScenarioConfig(ratio_m=0.5, n_train=100), 3)
    am = a.x[(a.group == M) & (a.clean_label == 0)]
    bm = b.x[(b.group == M) & (b.clean_label == 0)]
    assert np.array_equal(am, bm[: len(am)])


def test_config_guards():
    with pytest.raises(RangeError):
        ScenarioConfig(noise_fraction=0.6)
    with pytest.raises(RangeError):
        ScenarioConfig(ratio_m=1.5)

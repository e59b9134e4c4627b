import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flab.errors import TrainingError, UsageError
from flab.synthgen import Dataset, ScenarioConfig, make_train_set, sample_testset
from flab.tinynet import (
    Architecture, Hyperparams, ModelParams, accuracy, backward, finite_difference, forward,
    gradient_check, init_params, loss, predict, train, train_pool,
)

ARCH = Architecture()


def golden_params():
    return ModelParams(
        [np.array([[0.5, -1.0, 0.25], [1.5, 0.75, -0.5]]),
         np.array([[1.0, -0.5], [0.3, 0.8], [-1.2, 0.4]]),
         np.array([[0.7], [-1.1]])],
        [np.array([0.1, -0.2, 0.05]), np.array([0.0, 0.1]), np.array([0.2])],
    )


def zero_params(arch=ARCH):
    return ModelParams([np.zeros(s) for s in arch.shapes], [np.zeros(s[1]) for s in arch.shapes])


def test_init_is_deterministic_and_seed_sensitive():
    assert init_params(ARCH, 5) == init_params(ARCH, 5)
    assert init_params(ARCH, 5) != init_params(ARCH, 6)


def test_init_first_layer_std():
    wide = Architecture((2, 20000, 1))
    w = init_params(wide, 0).weights[0]
    assert w.std() == pytest.approx(1.0, abs=0.01)
    assert not any(b.any() for b in init_params(wide, 0).biases)


def test_zero_params_give_half():
    x = np.random.default_rng(0).normal(size=(10, 2))
    assert np.all(forward(zero_params(), x) == 0.5)
    assert np.all(predict(zero_params(), x) == 1)  # tie goes to class 1


def test_forward_golden_value():
    # frozen from a pure-Python loop implementation of the same network
    assert forward(golden_params(), [0.3, -0.4])[0] == pytest.approx(0.4867531007331736, abs=1e-15)


def test_forward_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        forward(golden_params(), [np.nan, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2), st.integers(0, 2**32))
def test_output_strictly_inside_unit_interval(x, seed):
    params = init_params(ARCH, seed)
    params.weights[-1] *= 1e3
    p = forward(params, x)
    assert np.all((p > 0) & (p < 1))


def test_loss_values():
    assert loss(zero_params(), [[0.1, 0.2]], [1]) == pytest.approx(np.log(2), abs=1e-12)
    assert loss(zero_params(), [[0.1, 0.2]], [1], 0.1) == loss(zero_params(), [[0.1, 0.2]], [1])
    params = init_params(ARCH, 2)
    x, y = np.random.default_rng(1).normal(size=(7, 2)), [0, 1, 1, 0, 1, 0, 1]
    l1 = sum(np.abs(w).sum() for w in params.weights)
    assert loss(params, x, y, 0.02) - loss(params, x, y, 0.01) == pytest.approx(0.01 * l1, rel=1e-12)
    with pytest.raises(UsageError):
        loss(params, np.zeros((0, 2)), [])


def test_l1_gradient_alone_is_sign():
    params = init_params(ARCH, 3)
    x, y = [[0.2, -0.1]], [1]
    lam = 0.05
    diff = backward(params, x, y, lam)
    base = backward(params, x, y, 0.0)
    for dw, bw, w in zip(diff.weights, base.weights, params.weights):
        assert np.allclose(dw - bw, lam * np.sign(w), atol=1e-15)
    for db, bb in zip(diff.biases, base.biases):
        assert np.array_equal(db, bb)


def test_backward_matches_central_differences(rng):
    params = init_params(ARCH, 7)
    x = rng.normal(size=(12, 2))
    y = rng.integers(0, 2, 12)
    analytic = backward(params, x, y, 0.003).flat()
    numeric, valid = finite_difference(params, x, y, 0.003)
    rel = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-7)
    assert rel[valid].max() <= 1e-4
    assert valid.mean() > 0.9


def test_gradient_check_suite():
    assert gradient_check(n_draws=20, seed=1) <= 1e-4


def test_zero_gradient_at_interpolating_minimum():
    two = Dataset(np.array([[-0.5, -0.35], [-0.5, 0.35]]), np.array([0, 0], np.int8),
                  np.array([0, 1], np.int8), np.array([0, 1], np.int8))
    params = train(two, ARCH, Hyperparams(epochs=20000, learning_rate=0.5), 3)
    assert np.linalg.norm(backward(params, two.x, two.observed_label).flat()) < 1e-6


def test_first_layer_sign_symmetry(rng):
    params = init_params(ARCH, 8)
    x, y = rng.normal(size=(9, 2)), rng.integers(0, 2, 9)
    flipped = ModelParams([-params.weights[0], *params.weights[1:]], params.biases)
    assert loss(flipped, -x, y, 0.01) == pytest.approx(loss(params, x, y, 0.01), abs=1e-14)


def test_train_deterministic_and_pool_members_match_single_runs(small_scenario):
    data = make_train_set(small_scenario)
    hyper = Hyperparams(epochs=3)
    pool = train_pool(data, ARCH, hyper, [1, 2, 3])
    assert train(data, ARCH, hyper, 2) == pool[1]
    assert train(data, ARCH, hyper, 2) == train(data, ARCH, hyper, 2)


def test_sigma_zero_training_accuracy_is_perfect():
    cfg = ScenarioConfig(sigma=0.0, n_train=200)
    data = make_train_set(cfg)
    assert accuracy(train(data, ARCH, Hyperparams(), 0), data) == 1.0


def test_noiseless_default_test_accuracy():
    cfg = ScenarioConfig(n_train=1000)
    model = train(make_train_set(cfg, 1), ARCH, Hyperparams(), 4)
    assert accuracy(model, sample_testset(cfg, 2)) >= 0.93


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises_with_epoch(small_scenario):
    with pytest.raises(TrainingError) as info:
        train(make_train_set(small_scenario), ARCH, Hyperparams(learning_rate=1e200, epochs=5), 0)
    assert info.value.epoch >= 0


def test_params_text_round_trip():
    params = init_params(ARCH, 9)
    params.provenance = {"fold": 1, "model": 3}
    back = ModelParams.loads(params.dumps())
    assert back == params
    assert back.provenance == params.provenance
    assert params.dumps().startswith("flab-params v1\nlayers 3\nshape 2 16\n")


def test_hyperparams_and_arch_validation():
    with pytest.raises(UsageError):
        Hyperparams(learning_rate=0)
    with pytest.raises(UsageError):
        Architecture((2, 1))

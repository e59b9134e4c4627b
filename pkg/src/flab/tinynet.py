"""Small fully-connected binary classifier with hand-written backprop.

Hidden layers use ReLU, the output a logistic unit. Training is minibatch SGD
with momentum and an optional L1 penalty on weights (biases are not
penalized). A pool of models sharing one training set is trained as a single
stacked computation: every array carries a leading model axis, so one
numpy call advances all members at once.

Parameter file layout (text, UTF-8)::

    flab-params v1
    layers <L>
    shape <fan_in> <fan_out>        # L lines, input layer first
    provenance <json>
    W <l> <fan_in*fan_out floats, row-major>
    b <l> <fan_out floats>
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError, UsageError
from .rng import SplitMix64

PARAMS_MAGIC = "flab-params v1"
_P_MIN = np.nextafter(0.0, 1.0)
_P_MAX = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class Architecture:
    widths: tuple = (2, 16, 16, 1)

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 3 or widths[-1] != 1 or min(widths) < 1:
            raise UsageError(f"invalid architecture {widths}", "tinynet")

    @property
    def shapes(self):
        return list(zip(self.widths[:-1], self.widths[1:]))


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 50
    l1_lambda: float = 0.0

    def __post_init__(self):
        if min(self.learning_rate, self.momentum, self.batch_size, self.epochs) <= 0 or self.l1_lambda < 0:
            raise UsageError(f"invalid hyperparameters {self}", "tinynet")


@dataclass
class ModelParams:
    weights: list
    biases: list
    provenance: dict = field(default_factory=dict)

    @property
    def arch(self) -> Architecture:
        return Architecture(tuple(w.shape[0] for w in self.weights) + (self.weights[-1].shape[1],))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return len(self.weights) == len(other.weights) and all(
            np.array_equal(a, b)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )

    def dumps(self) -> str:
        lines = [PARAMS_MAGIC, f"layers {len(self.weights)}"]
        lines += [f"shape {w.shape[0]} {w.shape[1]}" for w in self.weights]
        lines.append("provenance " + json.dumps(self.provenance, sort_keys=True))
        for i, w in enumerate(self.weights):
            lines.append(f"W {i} " + " ".join(repr(float(v)) for v in w.ravel()))
        for i, b in enumerate(self.biases):
            lines.append(f"b {i} " + " ".join(repr(float(v)) for v in b.ravel()))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ModelParams":
        lines = text.splitlines()
        if not lines or lines[0] != PARAMS_MAGIC:
            raise UsageError("not a flab parameter file", "tinynet")
        n_layers = int(lines[1].split()[1])
        shapes = [tuple(int(v) for v in lines[2 + i].split()[1:]) for i in range(n_layers)]
        provenance = json.loads(lines[2 + n_layers].split(" ", 1)[1])
        body = lines[3 + n_layers:]
        weights = [np.array(body[i].split()[2:], dtype=np.float64).reshape(s) for i, s in enumerate(shapes)]
        biases = [np.array(body[n_layers + i].split()[2:], dtype=np.float64) for i in range(n_layers)]
        return cls(weights, biases, provenance)


def init_params(arch: Architecture, seed: int) -> ModelParams:
    """He-normal weights (std sqrt(2/fan_in)), zero biases."""
    rng = SplitMix64(seed)
    weights, biases = [], []
    for fan_in, fan_out in arch.shapes:
        weights.append(rng.normal(fan_in * fan_out).reshape(fan_in, fan_out) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights, biases, {"seed": int(seed)})


def sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


# Stacked kernels: Ws[l] is (P, fan_in, fan_out), bs[l] is (P, 1, fan_out),
# X is (P, B, 2) and y is (P, B).

def _forward_stack(Ws, bs, X):
    acts, pre = [X], []
    a = X
    for i, (W, b) in enumerate(zip(Ws, bs)):
        z = np.matmul(a, W) + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < len(Ws) - 1 else z
        acts.append(a)
    return acts, pre


def _loss_stack(Ws, pre, y, l1_lambda):
    z = pre[-1][..., 0]
    data = np.mean(_softplus(z) - y * z, axis=-1)
    if l1_lambda:
        data = data + l1_lambda * sum(np.abs(W).sum(axis=(1, 2)) for W in Ws)
    return data


def _backward_stack(Ws, acts, pre, y, l1_lambda):
    n = y.shape[-1]
    delta = (sigmoid(pre[-1]) - y[..., None]) / n
    gWs, gbs = [None] * len(Ws), [None] * len(Ws)
    for i in range(len(Ws) - 1, -1, -1):
        gWs[i] = np.matmul(acts[i].transpose(0, 2, 1), delta)
        gbs[i] = delta.sum(axis=1, keepdims=True)
        if l1_lambda:
            gWs[i] = gWs[i] + l1_lambda * np.sign(Ws[i])
        if i:
            delta = np.matmul(delta, Ws[i].transpose(0, 2, 1)) * (pre[i - 1] > 0)
    return gWs, gbs


def _stack(models):
    Ws = [np.stack([m.weights[i] for m in models]) for i in range(len(models[0].weights))]
    bs = [np.stack([m.biases[i][None, :] for m in models]) for i in range(len(models[0].biases))]
    return Ws, bs


def _unstack(Ws, bs, provenances):
    return [
        ModelParams([W[j].copy() for W in Ws], [b[j, 0].copy() for b in bs], prov)
        for j, prov in enumerate(provenances)
    ]


def _as_batch(features, labels=None):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("[tinynet] non-finite input features")
    if labels is None:
        return x
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if len(y) == 0:
        raise UsageError("empty batch", "tinynet")
    return x, y


def forward(params: ModelParams, features) -> np.ndarray:
    """Probability of class 1 per row, clipped into the open interval (0, 1)."""
    x = _as_batch(features)
    Ws, bs = _stack([params])
    _, pre = _forward_stack(Ws, bs, x[None])
    return np.clip(sigmoid(pre[-1][0, :, 0]), _P_MIN, _P_MAX)


def predict(params: ModelParams, features) -> np.ndarray:
    return (forward(params, features) >= 0.5).astype(np.int8)


def loss(params: ModelParams, features, labels, l1_lambda: float = 0.0) -> float:
    """Mean binary cross-entropy plus ``l1_lambda * sum |W|``."""
    x, y = _as_batch(features, labels)
    Ws, bs = _stack([params])
    _, pre = _forward_stack(Ws, bs, x[None])
    return float(_loss_stack(Ws, pre, y[None], l1_lambda)[0])


def backward(params: ModelParams, features, labels, l1_lambda: float = 0.0) -> ModelParams:
    """Analytic gradient of :func:`loss`, shaped like ``params``."""
    x, y = _as_batch(features, labels)
    Ws, bs = _stack([params])
    acts, pre = _forward_stack(Ws, bs, x[None])
    gWs, gbs = _backward_stack(Ws, acts, pre, y[None], l1_lambda)
    return _unstack(gWs, gbs, [{}])[0]


def train_pool(train_set, arch: Architecture, hyper: Hyperparams, seeds, provenances=None):
    """Train one model per seed on the same data; members never interact."""
    if len(train_set) == 0:
        raise UsageError("empty training set", "tinynet")
    seeds = [int(s) for s in seeds]
    X = np.asarray(train_set.x, dtype=np.float64)
    y = np.asarray(train_set.observed_label, dtype=np.float64)
    n, bsz = len(y), hyper.batch_size
    rngs = [SplitMix64(s) for s in seeds]
    Ws, bs = _stack([_init_from(arch, r) for r in rngs])
    vW = [np.zeros_like(W) for W in Ws]
    vb = [np.zeros_like(b) for b in bs]
    lr, mu, lam = hyper.learning_rate, hyper.momentum, hyper.l1_lambda
    for epoch in range(hyper.epochs):
        order = np.stack([r.permutation(n) for r in rngs])
        for start in range(0, n, bsz):
            idx = order[:, start:start + bsz]
            acts, pre = _forward_stack(Ws, bs, X[idx])
            gWs, gbs = _backward_stack(Ws, acts, pre, y[idx], lam)
            for i in range(len(Ws)):
                vW[i] *= mu
                vW[i] -= lr * gWs[i]
                Ws[i] += vW[i]
                vb[i] *= mu
                vb[i] -= lr * gbs[i]
                bs[i] += vb[i]
        last = _loss_stack(Ws, pre, y[idx], lam)
        if not np.all(np.isfinite(last)) or not all(np.isfinite(W).all() for W in Ws):
            raise TrainingError("non-finite loss", epoch)
    if provenances is None:
        provenances = [{"seed": s} for s in seeds]
    return _unstack(Ws, bs, provenances)


def _init_from(arch, rng):
    weights, biases = [], []
    for fan_in, fan_out in arch.shapes:
        weights.append(rng.normal(fan_in * fan_out).reshape(fan_in, fan_out) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights, biases)


def train(train_set, arch: Architecture, hyper: Hyperparams, seed: int, provenance=None) -> ModelParams:
    return train_pool(train_set, arch, hyper, [seed], None if provenance is None else [provenance])[0]


def accuracy(params: ModelParams, dataset) -> float:
    return float(np.mean(predict(params, dataset.x) == dataset.clean_label))


def _unflatten_stack(theta, arch):
    """Split rows of a (P, n_params) matrix into stacked weights and biases."""
    Ws, bs, pos = [], [], 0
    for fan_in, fan_out in arch.shapes:
        Ws.append(theta[:, pos:pos + fan_in * fan_out].reshape(-1, fan_in, fan_out))
        pos += fan_in * fan_out
        bs.append(theta[:, pos:pos + fan_out].reshape(-1, 1, fan_out))
        pos += fan_out
    return Ws, bs


def finite_difference(params: ModelParams, features, labels, l1_lambda=0.0, step=1e-5):
    """Central-difference gradient of :func:`loss` for every coordinate.

    All 2 * n_params probes are evaluated as one stacked forward pass. Returns
    ``(grads, valid)`` as flat vectors in :meth:`ModelParams.flat` order;
    ``valid`` marks coordinates whose probes keep every ReLU on the same side
    of its kink, the only places where the central difference is meaningful.
    """
    x, y = _as_batch(features, labels)
    theta = params.flat()
    n = theta.size
    probes = np.concatenate([theta + step * np.eye(n), theta - step * np.eye(n)])
    Ws, bs = _unflatten_stack(probes, params.arch)
    _, pre = _forward_stack(Ws, bs, x[None])
    losses = _loss_stack(Ws, pre, y[None], l1_lambda)
    grads = (losses[:n] - losses[n:]) / (2 * step)
    valid = np.ones(n, dtype=bool)
    for z in pre[:-1]:
        active = z > 0
        valid &= np.all(active[:n] == active[n:], axis=(1, 2))
    return grads, valid


def gradient_check(n_draws=100, seed=0, arch=None, step=1e-5, floor=1e-7) -> float:
    """Max relative error between :func:`backward` and central differences.

    Each draw takes fresh He-initialized parameters with perturbed biases, a
    random batch of 1-32 rows and, on every other draw, a random L1 strength.
    Relative error is ``|a - n| / max(|a|, |n|, floor)``. Skipped: weights
    within 1e-6 of zero when the L1 term is active, and coordinates whose
    probes straddle a ReLU kink.
    """
    arch = arch or Architecture()
    rng = SplitMix64(seed)
    worst = 0.0
    for i in range(n_draws):
        params = init_params(arch, int(rng.u64(1)[0]))
        for b in params.biases:
            b += 0.1 * rng.normal(b.size)
        n = 1 + int(rng.u64(1)[0] % 32)
        x = rng.normal(2 * n).reshape(n, 2)
        y = (rng.uniform(n) < 0.5).astype(np.float64)
        lam = float(rng.uniform(1)[0]) * 1e-2 if i % 2 else 0.0
        analytic = backward(params, x, y, lam).flat()
        numeric, valid = finite_difference(params, x, y, lam, step)
        if lam > 0:
            is_weight = np.concatenate([np.full(a.size, w) for pair in zip(params.weights, params.biases)
                                        for a, w in zip(pair, (True, False))])
            valid &= ~(is_weight & (np.abs(params.flat()) < 1e-6))
        err = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
        if valid.any():
            worst = max(worst, float(err[valid].max()))
    return worst

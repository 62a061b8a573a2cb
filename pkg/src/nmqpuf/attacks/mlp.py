"""Multilayer perceptron attack with hand-written backpropagation and Adam.

Inputs are challenges encoded +/-1; the output layer has two units with a
softmax, trained on mean cross-entropy.  All randomness (initialisation,
validation hold-out, minibatch order) comes from one seeded generator and
every reduction runs single-threaded in a fixed order, so a seed reproduces
a run exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..dataset import CrpDataset
from .features import pm1
from .report import AttackReport, make_report

ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0), lambda z, a: (z > 0).astype(z.dtype)),
    "tanh": (np.tanh, lambda z, a: 1 - a * a),
}


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple = (128, 128, 128, 128)
    activation: str = "relu"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 30
    patience: int = 5
    validation_fraction: float = 0.05
    dtype: str = "float32"

    def __post_init__(self):
        if len(self.hidden) < 1:
            raise ValueError("need at least one hidden layer")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class MlpModel:
    sizes: tuple
    weights: list
    biases: list
    config: MlpConfig = field(default_factory=MlpConfig)
    seed: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def init(cls, n_inputs: int, config: MlpConfig = MlpConfig(), seed: int = 0, rng=None):
        rng = np.random.default_rng(seed) if rng is None else rng
        sizes = (n_inputs, *config.hidden, 2)
        dt = np.dtype(config.dtype)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append((rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)).astype(dt))
            biases.append(np.zeros(fan_out, dtype=dt))
        return cls(sizes, weights, biases, config, seed)

    @property
    def params(self):
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def forward(self, x):
        """Return logits and the per-layer cache needed by :meth:`backward`."""
        act, _ = ACTIVATIONS[self.config.activation]
        cache = [(x, None)]
        a = x
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ W + b
            a = act(z)
            cache.append((a, z))
        return a @ self.weights[-1] + self.biases[-1], cache

    def loss_and_grads(self, x, y):
        """Mean cross-entropy of the two-way softmax and its gradient for every parameter."""
        _, dact = ACTIVATIONS[self.config.activation]
        logits, cache = self.forward(x)
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        m = len(y)
        loss = -logp[np.arange(m), y].mean()
        delta = np.exp(logp)
        delta[np.arange(m), y] -= 1
        delta /= m
        grads = []
        for layer in range(len(self.weights) - 1, -1, -1):
            a_prev, _ = cache[layer]
            grads.append((a_prev.T @ delta, delta.sum(axis=0)))
            if layer:
                a, z = cache[layer]
                delta = (delta @ self.weights[layer].T) * dact(z, a)
        grads.reverse()
        return float(loss), [g for pair in grads for g in pair]

    def predict(self, challenges):
        x = pm1(challenges, self.config.dtype)
        out = np.empty(len(x), dtype=np.uint8)
        for i in range(0, len(x), 65536):
            logits, _ = self.forward(x[i:i + 65536])
            out[i:i + 65536] = logits.argmax(axis=1)
        return out


class Adam:
    def __init__(self, params, config: MlpConfig):
        self.cfg = config
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1 - c.beta1 ** self.t
        bc2 = 1 - c.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= (c.learning_rate / bc1) * m / (np.sqrt(v / bc2) + c.eps)


def gradient_check(model: MlpModel, x, y, h: float = 1e-6) -> float:
    """Largest relative error between analytic and central-difference gradients.

    The error is measured per parameter tensor as
    ``|num - analytic| / max(|num|, |analytic|)`` in the Euclidean norm, which
    keeps near-zero entries from turning rounding noise into large ratios.
    """
    _, grads = model.loss_and_grads(x, y)
    worst = 0.0
    for p, g in zip(model.params, grads):
        num = np.zeros_like(g, dtype=np.float64)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + h
            up, _ = model.loss_and_grads(x, y)
            p[idx] = old - h
            down, _ = model.loss_and_grads(x, y)
            p[idx] = old
            num[idx] = (up - down) / (2 * h)
        denom = max(np.linalg.norm(num), np.linalg.norm(g), 1e-12)
        worst = max(worst, float(np.linalg.norm(num - g) / denom))
    return worst


def fit_mlp(challenges, responses, config: MlpConfig = MlpConfig(), seed: int = 0, log=None):
    """Train on ``(challenges, responses)``; returns ``(model, diverged)``.

    A random ``validation_fraction`` of the training data is held out for
    early stopping: training ends once validation accuracy has not improved
    for ``patience`` epochs, and the best epoch's weights are kept.
    """
    rng = np.random.default_rng(seed)
    x = pm1(challenges, config.dtype)
    y = np.asarray(responses, dtype=np.intp)
    model = MlpModel.init(x.shape[1], config, seed, rng)
    n_val = int(len(y) * config.validation_fraction)
    order = rng.permutation(len(y))
    val, fit = order[:n_val], order[n_val:]
    xv, yv = x[val], y[val]
    opt = Adam(model.params, config)
    best = (-1.0, None)
    stale = 0
    for epoch in range(config.max_epochs):
        perm = fit[rng.permutation(len(fit))]
        total = 0.0
        for i in range(0, len(perm), config.batch_size):
            idx = perm[i:i + config.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = model.loss_and_grads(x[idx], y[idx])
            if not np.isfinite(loss):
                model.history.append({"epoch": epoch, "loss": float("nan"), "val_acc": float("nan")})
                return model, True
            with np.errstate(over="ignore", invalid="ignore"):
                opt.step(model.params, grads)
            total += loss * len(idx)
        acc = float((model.predict(challenges[val]) == yv).mean()) if n_val else 1.0 - total / len(fit)
        model.history.append({"epoch": epoch, "loss": total / len(fit), "val_acc": acc})
        if log:
            log(f"epoch {epoch}: loss {total / len(fit):.4f} val {acc:.4f}")
        if acc > best[0]:
            best = (acc, [p.copy() for p in model.params])
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    for p, b in zip(model.params, best[1]):
        p[...] = b
    return model, False


def train_mlp(train: CrpDataset, test: CrpDataset, config: MlpConfig = MlpConfig(), seed: int = 0,
              log=None) -> tuple[MlpModel, AttackReport]:
    t0 = time.perf_counter()
    model, diverged = fit_mlp(train.challenges, train.responses, config, seed, log)
    wall = time.perf_counter() - t0
    epochs = len(model.history)
    notes = f"layers {'-'.join(map(str, model.sizes))}, {epochs} epochs"
    if diverged:
        notes += "; aborted: loss became NaN"
    settings = (config,)
    report = make_report("mlp", None if diverged else model, train, test, seed, settings, wall,
                         failed=diverged, notes=notes)
    return model, report

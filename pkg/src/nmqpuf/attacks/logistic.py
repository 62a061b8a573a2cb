"""Logistic regression on parity features."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

from ..dataset import CrpDataset
from .features import parity_transform
from .report import AttackReport, make_report

NMQ_FEATURE_NOTE = "assumption: NMQ-RO attacked with the arbiter parity feature map"


@dataclass(frozen=True)
class LrConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int | None = None  # None = full batch
    grad_tol: float = 1e-4
    method: str = "gd"  # "gd" (plain gradient descent) or "lbfgs" (quasi-Newton, run to convergence)


@dataclass
class LinearModel:
    """Predicts 1 iff ``w . phi(c) < 0``, matching the arbiter sign convention."""

    weights: np.ndarray
    config: LrConfig
    seed: int
    converged: bool = True

    def margin(self, challenges):
        return parity_transform(challenges) @ self.weights

    def predict(self, challenges):
        return (self.margin(challenges) < 0).astype(np.uint8)

    def flipped(self) -> "LinearModel":
        return LinearModel(-self.weights, self.config, self.seed, self.converged)


def _gradient(w, X, y):
    # P(response = 1) = sigmoid(-w.phi)
    p1 = expit(-(X @ w))
    return X.T @ (y - p1) / len(y)


def _loss(w, X, y):
    s = 1.0 - 2.0 * y
    return -log_expit(s * (X @ w)).mean(), _gradient(w, X, y)


def fit_logistic(X, y, config: LrConfig = LrConfig(), seed: int = 0):
    """Minimise mean cross-entropy; returns ``(weights, converged)``."""
    rng = np.random.default_rng(seed)
    y = y.astype(np.float64)
    w = rng.normal(0.0, 0.01, X.shape[1])
    if config.method == "lbfgs":
        res = minimize(_loss, w, args=(X, y), jac=True, method="L-BFGS-B",
                       options={"maxiter": config.epochs, "gtol": config.grad_tol * 1e-4})
        return res.x, bool(res.success)
    if config.method != "gd":
        raise ValueError(f"unknown optimizer {config.method!r}")
    bs = config.batch_size or len(y)
    for _ in range(config.epochs):
        order = rng.permutation(len(y)) if bs < len(y) else slice(None)
        Xs, ys = X[order], y[order]
        for i in range(0, len(y), bs):
            w -= config.learning_rate * _gradient(w, Xs[i:i + bs], ys[i:i + bs])
    g = np.linalg.norm(_gradient(w, X, y))
    return w, bool(np.isfinite(g) and g < config.grad_tol)


def train_logistic_regression(train: CrpDataset, test: CrpDataset, config: LrConfig = LrConfig(),
                              seed: int = 0) -> tuple[LinearModel, AttackReport]:
    t0 = time.perf_counter()
    w, converged = fit_logistic(parity_transform(train.challenges), train.responses, config, seed)
    model = LinearModel(w, config, seed, converged)
    notes = []
    if not converged:
        notes.append("gradient norm above tolerance after the epoch budget")
    if train.header.architecture.endswith("nmq-ro"):
        notes.append(NMQ_FEATURE_NOTE)
    settings = (config.learning_rate, config.epochs, config.batch_size)
    report = make_report("lr", model, train, test, seed, settings, time.perf_counter() - t0,
                         notes="; ".join(notes))
    return model, report

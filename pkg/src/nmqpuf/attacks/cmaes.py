"""CMA-ES and the reliability side-channel attack built on it.

The optimizer follows the usual (mu/mu_w, lambda) scheme with cumulative
step-size adaptation and rank-one plus rank-mu covariance updates, using the
default strategy parameters (population ``4 + floor(3 ln N)``, log-linear
recombination weights).  It minimises.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..dataset import CrpDataset
from .features import parity_transform
from .logistic import LinearModel, LrConfig
from .report import AttackReport, make_report

EPSILON_GRID = (0.05, 0.1, 0.2, 0.4)
MIN_EVALS = 11


class CMAES:
    def __init__(self, x0, sigma0: float, seed: int = 0, popsize: int | None = None):
        x0 = np.asarray(x0, dtype=np.float64)
        N = x0.size
        self.N = N
        self.rng = np.random.default_rng(seed)
        self.lam = popsize or 4 + int(3 * np.log(N))
        self.mu = self.lam // 2
        w = np.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)
        mueff = self.mueff
        self.cc = (4 + mueff / N) / (N + 4 + 2 * mueff / N)
        self.cs = (mueff + 2) / (N + mueff + 5)
        self.c1 = 2 / ((N + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((N + 2) ** 2 + mueff))
        self.damps = 1 + 2 * max(0.0, np.sqrt((mueff - 1) / (N + 1)) - 1) + self.cs
        self.chi_n = np.sqrt(N) * (1 - 1 / (4 * N) + 1 / (21 * N * N))
        self.mean = x0.copy()
        self.sigma = float(sigma0)
        self.C = np.eye(N)
        self.B = np.eye(N)
        self.D = np.ones(N)
        self.pc = np.zeros(N)
        self.ps = np.zeros(N)
        self.generation = 0
        self._eigen_gen = 0

    def _update_eigen(self):
        self.C = np.triu(self.C) + np.triu(self.C, 1).T
        vals, self.B = np.linalg.eigh(self.C)
        self.D = np.sqrt(np.maximum(vals, 1e-300))
        self._eigen_gen = self.generation

    def ask(self) -> np.ndarray:
        """``lambda`` candidate points, one per row."""
        if self.generation - self._eigen_gen > self.lam / (self.c1 + self.cmu) / self.N / 10:
            self._update_eigen()
        z = self.rng.standard_normal((self.lam, self.N))
        return self.mean + self.sigma * (z * self.D) @ self.B.T

    def tell(self, points: np.ndarray, values: np.ndarray) -> None:
        order = np.argsort(values, kind="stable")[: self.mu]
        y = (points[order] - self.mean) / self.sigma
        step = self.weights @ y
        self.mean = self.mean + self.sigma * step
        inv_sqrt = self.B @ np.diag(1 / self.D) @ self.B.T
        self.ps = (1 - self.cs) * self.ps + np.sqrt(self.cs * (2 - self.cs) * self.mueff) * inv_sqrt @ step
        self.generation += 1
        norm_ps = np.linalg.norm(self.ps) / np.sqrt(1 - (1 - self.cs) ** (2 * self.generation))
        hsig = norm_ps / self.chi_n < 1.4 + 2 / (self.N + 1)
        self.pc = (1 - self.cc) * self.pc + hsig * np.sqrt(self.cc * (2 - self.cc) * self.mueff) * step
        rank_mu = (y.T * self.weights) @ y
        self.C = ((1 - self.c1 - self.cmu) * self.C
                  + self.c1 * (np.outer(self.pc, self.pc) + (1 - hsig) * self.cc * (2 - self.cc) * self.C)
                  + self.cmu * rank_mu)
        self.sigma *= np.exp(self.cs / self.damps * (np.linalg.norm(self.ps) / self.chi_n - 1))

    def step_size(self) -> float:
        return self.sigma * float(np.sqrt(np.max(np.diag(self.C))))


@dataclass
class CmaResult:
    x: np.ndarray
    value: float
    evaluations: int
    restarts: int
    collapsed: bool


def minimize(fn, x0, sigma0: float, seed: int = 0, max_generations: int = 500, tolx: float = 1e-8,
             tolfun: float = 1e-9, max_restarts: int = 3, popsize: int | None = None) -> CmaResult:
    """Minimise ``fn`` (called on a ``(lambda, N)`` batch, returning ``lambda`` values).

    A run that collapses (step size below ``tolx`` or best value flat for
    ``10 + 30 N / lambda`` generations) before ``max_generations`` is
    restarted from the best point with twice the previous initial step size,
    at most ``max_restarts`` times.
    """
    rng = np.random.default_rng(seed)
    best_x, best_v = np.asarray(x0, dtype=np.float64), np.inf
    evals = 0
    start, sigma = best_x, sigma0
    collapsed = False
    for restart in range(max_restarts + 1):
        es = CMAES(start, sigma, int(rng.integers(2**63)), popsize)
        flat_window = 10 + int(np.ceil(30 * es.N / es.lam))
        recent = []
        collapsed = False
        for _ in range(max_generations):
            pts = es.ask()
            vals = np.asarray(fn(pts), dtype=np.float64)
            evals += len(vals)
            es.tell(pts, vals)
            i = int(np.argmin(vals))
            if vals[i] < best_v:
                best_x, best_v = pts[i].copy(), float(vals[i])
            recent.append(float(vals[i]))
            if es.step_size() < tolx or (len(recent) >= flat_window
                                         and max(recent[-flat_window:]) - min(recent[-flat_window:]) < tolfun):
                collapsed = True
                break
        if not collapsed:
            break
        start, sigma = best_x, 2 * sigma
    return CmaResult(best_x, best_v, evals, restart, collapsed)


def reliability_profile(ds: CrpDataset, min_evals: int = MIN_EVALS):
    """Distinct challenges, their majority responses and reliabilities ``|2 p1 - 1|``."""
    packed = ds.packed
    uniq, first, inverse, counts = np.unique(packed, return_index=True, return_inverse=True, return_counts=True)
    if counts.min() < min_evals:
        raise ValueError(f"every challenge needs at least {min_evals} evaluations, found {counts.min()}")
    ones = np.bincount(inverse, weights=ds.responses, minlength=len(uniq))
    frac = ones / counts
    return ds.challenges[first], (frac > 0.5).astype(np.uint8), np.abs(2 * frac - 1)


def reliability_fitness(features, reliability, epsilon):
    """Negative correlation between measured reliability and ``|w . phi| > epsilon * std``.

    Vectorised over a ``(lambda, N)`` batch of weight vectors.
    """
    r = reliability - reliability.mean()
    r_norm = np.linalg.norm(r)

    def fn(W):
        margin = np.abs(features @ W.T)
        scale = margin.std(axis=0, keepdims=True)
        pred = (margin > epsilon * np.where(scale > 0, scale, 1)).astype(np.float64)
        pred -= pred.mean(axis=0, keepdims=True)
        denom = np.linalg.norm(pred, axis=0) * r_norm
        corr = np.where(denom > 0, (r @ pred) / np.where(denom > 0, denom, 1), 0.0)
        return -corr

    return fn


def cmaes_reliability_attack(train: CrpDataset, test: CrpDataset, seed: int = 0, epsilons=EPSILON_GRID,
                             max_generations: int = 500, max_restarts: int = 3,
                             min_evals: int = MIN_EVALS) -> tuple[LinearModel | None, AttackReport]:
    """Fit additive-delay weights whose small margins line up with unreliable challenges."""
    t0 = time.perf_counter()
    challenges, majority, reliability = reliability_profile(train, min_evals)
    settings = (tuple(epsilons), max_generations, max_restarts)
    if np.all(reliability == 1.0):
        return None, make_report("cmaes", None, train, test, seed, settings, time.perf_counter() - t0, failed=True,
                                 notes="no unreliable challenges: reliability carries no information")
    phi = parity_transform(challenges)
    rng = np.random.default_rng(seed)
    best = None
    for eps in epsilons:
        x0 = rng.standard_normal(phi.shape[1])
        res = minimize(reliability_fitness(phi, reliability, eps), x0, 1.0, int(rng.integers(2**63)),
                       max_generations, max_restarts=max_restarts)
        if best is None or res.value < best[1].value:
            best = (eps, res)
    eps, res = best
    model = LinearModel(res.x, LrConfig(), seed, converged=res.value < 0)
    # the reliability signal is blind to the sign of w; pick the orientation that matches most responses
    if np.mean(model.predict(challenges) == majority) < 0.5:
        model = model.flipped()
    notes = (f"epsilon {eps}, fitness {-res.value:.4f}, {res.evaluations} evaluations, "
             f"{res.restarts} restarts, {int(np.sum(reliability < 1))} unreliable challenges")
    return model, make_report("cmaes", model, train, test, seed, settings, time.perf_counter() - t0, notes=notes)

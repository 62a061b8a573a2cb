"""Low-degree Fourier learning of Boolean functions on {-1, +1}^n."""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from ..dataset import CrpDataset
from .features import pm1
from .report import AttackReport, make_report

MAX_SUBSETS = 200_000
CHUNK = 20_000


def subset_count(n: int, degree: int) -> int:
    return sum(comb(n, i) for i in range(degree + 1))


def low_degree_subsets(n: int, degree: int, max_subsets: int = MAX_SUBSETS) -> np.ndarray:
    """All index sets of size <= degree, padded with ``n`` to width ``degree``.

    Index ``n`` points at an appended constant-one column, so a padded row
    multiplies out to the character of the unpadded set.
    """
    count = subset_count(n, degree)
    if count > max_subsets:
        raise ValueError(f"{count} subsets of size <= {degree} exceed the budget of {max_subsets}")
    rows = [s + (n,) * (degree - len(s)) for d in range(degree + 1) for s in combinations(range(n), d)]
    return np.array(rows, dtype=np.intp).reshape(count, degree)


def characters(x, subsets) -> np.ndarray:
    """``chi_S(x) = prod_{i in S} x_i`` for every row of ``subsets``; ``x`` is +/-1."""
    xa = np.concatenate([x, np.ones((len(x), 1), dtype=x.dtype)], axis=1)
    if subsets.shape[1] == 0:
        return np.ones((len(x), len(subsets)), dtype=x.dtype)
    return xa[:, subsets].prod(axis=2)


@dataclass
class FourierModel:
    """Sign of the truncated Fourier expansion; response 1 iff the sum is negative."""

    subsets: np.ndarray
    coefficients: np.ndarray
    degree: int
    n: int

    def expansion(self, challenges):
        x = pm1(challenges, np.float32)
        out = np.empty(len(x))
        for i in range(0, len(x), CHUNK):
            out[i:i + CHUNK] = characters(x[i:i + CHUNK], self.subsets) @ self.coefficients
        return out

    def predict(self, challenges):
        return (self.expansion(challenges) < 0).astype(np.uint8)

    def heaviest(self, count: int = 10):
        """The ``count`` largest coefficients as ``(index set, value)`` pairs."""
        order = np.argsort(-np.abs(self.coefficients), kind="stable")[:count]
        return [(tuple(int(i) for i in self.subsets[j] if i < self.n), float(self.coefficients[j])) for j in order]


def estimate_coefficients(challenges, responses, degree: int, max_subsets: int = MAX_SUBSETS) -> FourierModel:
    """``c_S`` = empirical mean of ``y * chi_S(x)`` with ``y = 1 - 2 r``."""
    x = pm1(challenges, np.float32)
    subsets = low_degree_subsets(x.shape[1], degree, max_subsets)
    y = (1.0 - 2.0 * np.asarray(responses, dtype=np.float64)).astype(np.float32)
    acc = np.zeros(len(subsets))
    for i in range(0, len(x), CHUNK):
        acc += (y[i:i + CHUNK] @ characters(x[i:i + CHUNK], subsets)).astype(np.float64)
    return FourierModel(subsets, acc / len(x), degree, x.shape[1])


def fourier_low_degree_attack(train: CrpDataset, test: CrpDataset, degree: int = 2, seed: int = 0,
                              max_subsets: int = MAX_SUBSETS) -> tuple[FourierModel, AttackReport]:
    t0 = time.perf_counter()
    model = estimate_coefficients(train.challenges, train.responses, degree, max_subsets)
    report = make_report("fourier", model, train, test, seed, (degree,), time.perf_counter() - t0,
                         notes=f"degree {degree}, {len(model.subsets)} coefficients")
    return model, report

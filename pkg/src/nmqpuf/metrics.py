"""Uniformity, uniqueness, bit error rate and authentication-failure statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import binom

from .entropy import ENROLLMENT, NOISELESS, EnvironmentCondition, NoiseModel, pack_challenges

BER_TEMPERATURES = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)


@dataclass
class ResponseSet:
    """Responses of one instance to a list of distinct challenges."""

    instance_id: str
    challenges: np.ndarray
    responses: np.ndarray
    env: EnvironmentCondition = ENROLLMENT
    draws: np.ndarray | int = 0
    check_unique: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.challenges = np.asarray(self.challenges, dtype=np.uint8)
        self.responses = np.asarray(self.responses, dtype=np.uint8).ravel()
        if self.challenges.ndim != 2 or self.challenges.shape[0] != self.responses.shape[0]:
            raise ValueError("need exactly one response per challenge")
        if self.check_unique and len(np.unique(pack_challenges(self.challenges))) != len(self.responses):
            raise ValueError("challenges must be unique within a response set")

    def __len__(self):
        return len(self.responses)


def collect(puf, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0, instance_id="") -> ResponseSet:
    """Evaluate ``puf`` once per challenge and wrap the result."""
    responses = puf.evaluate(challenges, env, noise, draw)
    return ResponseSet(instance_id or repr(puf), challenges, responses, env, draw)


def _bits(x):
    return x.responses if isinstance(x, ResponseSet) else np.asarray(x, dtype=np.uint8).ravel()


def uniformity(rs) -> float:
    """Normalized Hamming weight of the responses."""
    bits = _bits(rs)
    if bits.size == 0:
        raise ValueError("uniformity of an empty response set")
    return float(bits.mean())


def uniqueness_groups(a, b, group_bits: int = 32) -> np.ndarray:
    """Fraction of differing bits in each consecutive ``group_bits`` block.

    A trailing partial block is dropped.
    """
    if isinstance(a, ResponseSet) and isinstance(b, ResponseSet):
        if a.challenges.shape != b.challenges.shape or not np.array_equal(a.challenges, b.challenges):
            raise ValueError("response sets must cover the same challenge list")
    ra, rb = _bits(a), _bits(b)
    if ra.shape != rb.shape:
        raise ValueError("response sets must cover the same challenge list")
    usable = (ra.size // group_bits) * group_bits
    if usable == 0:
        raise ValueError(f"need at least {group_bits} responses")
    diff = (ra[:usable] != rb[:usable]).reshape(-1, group_bits)
    return diff.mean(axis=1)


def uniqueness(a, b, group_bits: int = 32) -> float:
    """Normalized Hamming distance between two instances' responses."""
    return float(uniqueness_groups(a, b, group_bits).mean())


def pairwise_uniqueness(sets, group_bits: int = 32) -> np.ndarray:
    """Uniqueness of every unordered pair of response sets."""
    return np.array([uniqueness(a, b, group_bits) for a, b in combinations(sets, 2)])


@dataclass
class BerReport:
    temperatures: np.ndarray
    error_ratio: np.ndarray
    enrollment: EnvironmentCondition
    evals: int
    n_challenges: int

    def at(self, temperature: float) -> float:
        idx = np.flatnonzero(np.isclose(self.temperatures, temperature))
        if idx.size == 0:
            raise KeyError(temperature)
        return float(self.error_ratio[idx[0]])

    @property
    def worst(self) -> float:
        return float(self.error_ratio.max())


def enroll(puf, challenges, noise: NoiseModel, enrollment: EnvironmentCondition = ENROLLMENT) -> ResponseSet:
    """Single-evaluation enrollment (draw index 0, no majority voting)."""
    return collect(puf, challenges, enrollment, noise, draw=0)


def bit_error_rate(puf, enrolled: ResponseSet, temperatures=BER_TEMPERATURES, evals: int = 100,
                   noise: NoiseModel = NOISELESS) -> BerReport:
    """Fraction of re-evaluations disagreeing with the enrolled bits, per temperature.

    Re-evaluation ``k`` at temperature index ``t`` uses draw ``1 + t * evals + k``
    so no jitter realisation is shared with enrollment.
    """
    temps = np.atleast_1d(np.asarray(temperatures, dtype=np.float64))
    base = enrolled.env
    ratios = np.empty(temps.size)
    for ti, t in enumerate(temps):
        env = EnvironmentCondition(t, base.enrollment_temperature, base.t_min, base.t_max)
        mismatches = 0
        for k in range(evals):
            r = puf.evaluate(enrolled.challenges, env, noise, 1 + ti * evals + k)
            mismatches += int(np.count_nonzero(r != enrolled.responses))
        ratios[ti] = mismatches / (evals * len(enrolled))
    return BerReport(temps, ratios, base, evals, len(enrolled))


# -- authentication ---------------------------------------------------------


def margin_threshold(ber: float, n_crps: int, margin: float = 0.05) -> int:
    """Correct responses required: ``margin`` below (1 - BER), rounded down."""
    return int(math.floor(round(n_crps * (1.0 - ber - margin), 9)))


@dataclass(frozen=True)
class AuthFailure:
    ber: float
    n_crps: int
    threshold: int
    trials: int
    monte_carlo: float
    exact: float

    @property
    def stderr(self) -> float:
        p = self.exact
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else float("nan")


def exact_failure_probability(ber: float, n_crps: int, threshold: int) -> float:
    """P(correct responses < threshold), correct ~ Binomial(n_crps, 1 - ber)."""
    return float(binom.cdf(threshold - 1, n_crps, 1.0 - ber))


def auth_failure_probability(ber: float, n_crps: int, threshold: int, trials: int = 1_000_000,
                             seed: int = 0, chunk: int = 20_000) -> AuthFailure:
    """Monte-Carlo authentication failure rate with i.i.d. per-response errors.

    Each trial draws ``n_crps`` independent Bernoulli(ber) error indicators
    and fails when fewer than ``threshold`` responses are correct.
    """
    if not 0.0 <= ber <= 1.0:
        raise ValueError(f"ber must be in [0, 1], got {ber}")
    if threshold > n_crps:
        raise ValueError("threshold cannot exceed the number of CRPs")
    rng = np.random.default_rng(seed)
    failures = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        errors = np.count_nonzero(rng.random((m, n_crps)) < ber, axis=1)
        failures += int(np.count_nonzero(n_crps - errors < threshold))
        done += m
    return AuthFailure(ber, n_crps, threshold, trials, failures / trials if trials else float("nan"),
                       exact_failure_probability(ber, n_crps, threshold))


def required_crps(ber: float, target: float = 0.01, margin: float = 0.05, n_max: int = 5000) -> int:
    """Smallest CRP count from which the failure probability stays at or below ``target``.

    The floor in the threshold makes the curve saw-toothed, so the first
    crossing is not used; this returns the start of the final run of
    compliant counts up to ``n_max``.
    """
    ns = np.arange(1, n_max + 1)
    thresholds = np.floor(np.round(ns * (1.0 - ber - margin), 9)).astype(np.int64)
    fail = binom.cdf(thresholds - 1, ns, 1.0 - ber)
    bad = np.flatnonzero(fail > target)
    if bad.size and bad[-1] == n_max - 1:
        raise ValueError(f"failure target not reached within {n_max} CRPs")
    return int(ns[bad[-1] + 1]) if bad.size else 1


def auth_curve(bers, crp_counts, margin: float = 0.05):
    """Exact failure probability for each (BER, CRP count): rows of (ber, n, threshold, p)."""
    rows = []
    for ber in bers:
        for n in crp_counts:
            t = margin_threshold(ber, n, margin)
            rows.append((ber, n, t, exact_failure_probability(ber, n, t)))
    return rows

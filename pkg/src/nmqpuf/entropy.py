"""Entropy sources, environment and noise for delay-based PUF simulation.

An :class:`EntropySource` holds the manufacturing-time delay table of one PUF
instance.  Every evaluator in :mod:`nmqpuf.models` reads delays through
:func:`effective_delays`, which applies temperature drift and per-evaluation
jitter on top of the nominal table.

Delay table layout is ``delays[side, stage, bit]`` with ``side`` 0 = p (top
path / counter oscillator) and 1 = q (bottom path / toggling oscillator).
Stage ``i`` selects element ``delays[side, i, c_i]``.  The flattened
parameter vector (see :meth:`EntropySource.to_vector`) is::

    delays.ravel(order="C")  ++  [fixed_overhead]

i.e. index ``side * 2n + stage * 2 + bit`` for delays and ``4n`` for the
overhead.  Temperature coefficients are not part of the vector.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri

PS = 1e-12

P, Q = 0, 1


@dataclass(frozen=True)
class InstanceConfig:
    """Parameters from which PUF instances are sampled.

    The noise and temperature-coefficient defaults are calibrated so that a
    64-stage NMQ-RO instance shows about 3.3/6.5/13.1 % BER at g=100/200/400
    when re-evaluated at the enrollment temperature.
    """

    n: int = 64
    mu_ps: float = 10.0
    sigma_p: float = 0.05
    overhead_ps: float = 20.0
    kappa_mean: float = 1e-3
    kappa_sigma: float = 5e-5
    sigma_rel: float = 1.68e-3
    seed: int = 1

    def __post_init__(self):
        if not 1 <= self.n <= 64:
            raise ValueError(f"n must be in [1, 64], got {self.n}")
        if not self.mu_ps > 0:
            raise ValueError(f"mu_ps must be positive, got {self.mu_ps}")
        if self.sigma_p < 0:
            raise ValueError(f"sigma_p must be non-negative, got {self.sigma_p}")
        if self.overhead_ps < 0:
            raise ValueError("overhead_ps must be non-negative")
        if self.kappa_sigma < 0:
            raise ValueError("kappa_sigma must be non-negative")
        if self.sigma_rel < 0:
            raise ValueError("sigma_rel must be non-negative")

    def noise(self) -> "NoiseModel":
        return NoiseModel(self.sigma_rel, self.seed)

    def replace(self, **changes) -> "InstanceConfig":
        return dataclasses.replace(self, **changes)


_CONFIG_TYPES = {f.name: f.type for f in dataclasses.fields(InstanceConfig)}


def read_config(path) -> InstanceConfig:
    """Parse a ``key=value`` instance-config file.

    Every field of :class:`InstanceConfig` must be present exactly once.
    Blank lines and ``#`` comments are ignored; unknown keys are an error.
    """
    return parse_config(Path(path).read_text())


def parse_config(text: str) -> InstanceConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_TYPES:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[key] = int(value, 0) if _CONFIG_TYPES[key] == "int" else float(value)
    missing = sorted(set(_CONFIG_TYPES) - set(values))
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    return InstanceConfig(**values)


def format_config(config: InstanceConfig) -> str:
    return "".join(f"{f.name}={getattr(config, f.name)!r}\n" for f in dataclasses.fields(config))


def write_config(path, config: InstanceConfig) -> None:
    Path(path).write_text(format_config(config))


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EntropySource:
    """Immutable per-instance delay table (seconds) and temperature coefficients (1/degC)."""

    delays: np.ndarray
    fixed_overhead: float
    kappa: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delays", _readonly(self.delays))
        object.__setattr__(self, "kappa", _readonly(self.kappa))
        object.__setattr__(self, "fixed_overhead", float(self.fixed_overhead))
        if self.delays.ndim != 3 or self.delays.shape[0] != 2 or self.delays.shape[2] != 2:
            raise ValueError(f"delays must have shape (2, n, 2), got {self.delays.shape}")
        if self.kappa.shape != self.delays.shape:
            raise ValueError("kappa must align one-to-one with delays")
        if not np.all(self.delays > 0):
            raise ValueError("all nominal delays must be strictly positive")

    @property
    def n(self) -> int:
        return self.delays.shape[1]

    def to_vector(self) -> np.ndarray:
        return np.append(self.delays.ravel(), self.fixed_overhead)

    def with_vector(self, theta) -> "EntropySource":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (4 * self.n + 1,):
            raise ValueError(f"expected vector of length {4 * self.n + 1}, got {theta.shape}")
        return EntropySource(theta[:-1].reshape(self.delays.shape), theta[-1], self.kappa)

    def scaled(self, factor: float) -> "EntropySource":
        return EntropySource(self.delays * factor, self.fixed_overhead * factor, self.kappa)

    def __eq__(self, other):
        if not isinstance(other, EntropySource):
            return NotImplemented
        return (
            self.fixed_overhead == other.fixed_overhead
            and np.array_equal(self.delays, other.delays)
            and np.array_equal(self.kappa, other.kappa)
        )

    __hash__ = None


@dataclass(frozen=True)
class EnvironmentCondition:
    temperature: float = 20.0
    enrollment_temperature: float = 20.0
    t_min: float = field(default=0.0, repr=False)
    t_max: float = field(default=50.0, repr=False)

    def __post_init__(self):
        if not self.t_min <= self.temperature <= self.t_max:
            raise ValueError(
                f"temperature {self.temperature} outside [{self.t_min}, {self.t_max}]"
            )

    @property
    def delta(self) -> float:
        return self.temperature - self.enrollment_temperature


ENROLLMENT = EnvironmentCondition()


@dataclass(frozen=True)
class NoiseModel:
    """Per-evaluation multiplicative Gaussian jitter on every delay element.

    Jitter is a pure function of ``(seed, draw, challenge, element)`` so any
    evaluation can be reproduced in isolation, in any batch order.
    """

    sigma_rel: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_rel < 0:
            raise ValueError("sigma_rel must be non-negative")

    def derive(self, salt: int) -> "NoiseModel":
        """Independent noise stream, e.g. for the k-th member of a composition."""
        return NoiseModel(self.sigma_rel, int(_mix64(np.uint64(self.seed) ^ _mix64(np.uint64(salt + 1)))))


NOISELESS = NoiseModel(0.0, 0)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x):
    """splitmix64 finaliser; wraps modulo 2**64."""
    with np.errstate(over="ignore"):
        x = np.asarray(x, dtype=np.uint64)
        x = x ^ (x >> np.uint64(30))
        x = x * np.uint64(0xBF58476D1CE4E5B9)
        x = x ^ (x >> np.uint64(27))
        x = x * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def evaluation_key(seed: int, draw, key) -> np.ndarray:
    """Hash of one evaluation's address; broadcasts ``draw`` against ``key``."""
    with np.errstate(over="ignore"):
        h = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
        h = _mix64(h ^ (np.asarray(draw, dtype=np.uint64) * _GOLDEN))
        return _mix64(h ^ np.asarray(key, dtype=np.uint64))


def standard_normal_at(seed: int, draw, key, index) -> np.ndarray:
    """Counter-based N(0, 1) variates addressed by ``(seed, draw, key, index)``.

    Arguments broadcast against each other.
    """
    return _normal_from(evaluation_key(seed, draw, key), index)


def _normal_from(ekey, index):
    with np.errstate(over="ignore"):
        h = _mix64(ekey + (np.asarray(index, dtype=np.uint64) + np.uint64(1)) * _GOLDEN)
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def sample_entropy_source(seed: int, config: InstanceConfig = InstanceConfig()) -> EntropySource:
    """Draw one instance: delays ~ Normal(mu, sigma_p * mu) truncated to (0, inf).

    Truncation is by rejection, so with the default 5 % spread it never
    triggers in practice.
    """
    if not config.mu_ps > 0:
        raise ValueError("mu must be positive")
    if config.sigma_p < 0:
        raise ValueError("sigma_p must be non-negative")
    rng = np.random.default_rng(seed)
    mu = config.mu_ps * PS
    shape = (2, config.n, 2)
    delays = rng.normal(mu, config.sigma_p * mu, size=shape)
    bad = delays <= 0
    while bad.any():
        delays[bad] = rng.normal(mu, config.sigma_p * mu, size=int(bad.sum()))
        bad = delays <= 0
    kappa = rng.normal(config.kappa_mean, config.kappa_sigma, size=shape)
    return EntropySource(delays, config.overhead_ps * PS, kappa)


def as_challenges(c, n: int) -> np.ndarray:
    """Coerce to a 2-D uint8 bit matrix of width ``n``."""
    c = np.asarray(c)
    if c.ndim == 1:
        c = c[None, :]
    if c.ndim != 2 or c.shape[1] != n:
        raise ValueError(f"challenge length {c.shape[-1]} does not match n={n}")
    if c.dtype != np.uint8:
        if np.any((c != 0) & (c != 1)):
            raise ValueError("challenge bits must be 0 or 1")
        c = c.astype(np.uint8)
    return c


def pack_challenges(c) -> np.ndarray:
    """Bit matrix (m, n) -> uint64, stage 0 in the least significant bit."""
    c = np.asarray(c, dtype=np.uint64)
    if c.ndim == 1:
        c = c[None, :]
    weights = np.left_shift(np.uint64(1), np.arange(c.shape[1], dtype=np.uint64))
    return (c * weights).sum(axis=1, dtype=np.uint64)


def unpack_challenges(packed, n: int) -> np.ndarray:
    packed = np.asarray(packed, dtype=np.uint64).reshape(-1, 1)
    shifts = np.arange(n, dtype=np.uint64)
    return ((packed >> shifts) & np.uint64(1)).astype(np.uint8)


def random_challenges(m: int, n: int, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    return rng.integers(0, 2, size=(m, n), dtype=np.uint8)


def selected_delays(src: EntropySource, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0, salt=0):
    """Per-stage delays actually traversed, shape ``(m, 2, n)``.

    ``draw`` is a scalar or one index per challenge; ``salt`` separates the
    noise streams of distinct instances sharing one :class:`NoiseModel`.
    """
    c = as_challenges(challenges, src.n)
    n = src.n
    stage = np.arange(n)
    ci = c.astype(np.intp)
    sel = np.moveaxis(src.delays[:, stage[None, :], ci], 0, 1)
    if env.delta != 0.0:
        kap = np.moveaxis(src.kappa[:, stage[None, :], ci], 0, 1)
        sel = sel * (1.0 + kap * env.delta)
    if noise.sigma_rel > 0:
        element = (np.arange(2)[:, None] * 2 * n + 2 * stage[None, :])[None] + c[:, None, :]
        key = pack_challenges(c) ^ _mix64(np.uint64(salt))
        draw = np.broadcast_to(np.asarray(draw, dtype=np.uint64), (c.shape[0],))
        z = _normal_from(evaluation_key(noise.seed, draw, key)[:, None, None], element)
        sel = sel * (1.0 + noise.sigma_rel * z)
    return sel


def effective_delays(src: EntropySource, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0, salt=0):
    """Total oscillator delays ``(m, 2)``: overhead + sum of selected elements."""
    if noise.sigma_rel > 0:
        return src.fixed_overhead + selected_delays(src, challenges, env, noise, draw, salt).sum(axis=2)
    c = as_challenges(challenges, src.n)
    d = src.delays * (1.0 + src.kappa * env.delta) if env.delta != 0.0 else src.delays
    base = src.fixed_overhead + d[:, :, 0].sum(axis=1)
    return base + c.astype(np.float64) @ (d[:, :, 1] - d[:, :, 0]).T


def effective_delay(src: EntropySource, c, side, env=ENROLLMENT, noise=NOISELESS, draw=0, salt=0) -> float:
    """Delay of one side (``"p"``/``"q"`` or 0/1) for a single challenge."""
    c = np.asarray(c)
    if c.ndim != 1:
        raise ValueError("effective_delay takes a single challenge")
    side = {"p": P, "q": Q}.get(side, side)
    if side not in (P, Q):
        raise ValueError(f"side must be 'p' or 'q', got {side!r}")
    return float(effective_delays(src, c, env, noise, draw, salt)[0, side])

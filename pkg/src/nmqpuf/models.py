"""Arbiter PUF, NMQ-RO and k-XOR compositions.

All evaluators are batch-first: ``challenges`` is an ``(m, n)`` bit matrix (a
single 1-D challenge is accepted too) and ``draw`` is either a scalar or one
evaluation index per challenge.  Noise is addressed by ``(noise.seed, draw,
challenge, salt)``, so results never depend on batch composition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entropy import (
    ENROLLMENT,
    NOISELESS,
    EntropySource,
    as_challenges,
    effective_delays,
    selected_delays,
)

G_PRESETS = (100, 200, 400, 800, 5000)

APUF, NMQ_RO, XOR_NMQ_RO, XOR_APUF = "apuf", "nmq-ro", "xor-nmq-ro", "xor-apuf"
ARCHITECTURES = (APUF, NMQ_RO, XOR_NMQ_RO, XOR_APUF)


def parity_features(challenges) -> np.ndarray:
    """Cumulative-product (+/-1) features of the additive delay model, shape ``(m, n + 1)``.

    Bit ``c_i`` maps to ``s_i = 1 - 2 c_i``; feature ``i < n`` is
    ``s_i * s_{i+1} * ... * s_{n-1}`` and feature ``n`` is the constant +1.
    """
    c = np.asarray(challenges)
    if c.ndim == 1:
        c = c[None, :]
    s = 1.0 - 2.0 * c
    out = np.ones((c.shape[0], c.shape[1] + 1))
    out[:, :-1] = np.cumprod(s[:, ::-1], axis=1)[:, ::-1]
    return out


class ApufInstance:
    """Arbiter PUF on the standard additive delay model.

    ``delays[p, i, b]`` / ``delays[q, i, b]`` is the element driving the top /
    bottom output of stage ``i`` when ``c_i == b``; ``b == 1`` crosses the two
    signals.  The arbiter outputs 1 iff the top signal arrives strictly first,
    so an exact tie resolves to 0.
    """

    architecture = APUF
    g = 0
    k = 1

    def __init__(self, entropy: EntropySource):
        self.entropy = entropy

    @property
    def n(self):
        return self.entropy.n

    def linear_weights(self, env=ENROLLMENT):
        """``w`` with ``delay_difference == parity_features(c) @ w`` in the absence of jitter."""
        d = self.entropy.delays
        if env.delta != 0.0:
            d = d * (1.0 + self.entropy.kappa * env.delta)
        stage = d[0] - d[1]
        straight_plus_crossed = 0.5 * (stage[:, 0] + stage[:, 1])
        straight_minus_crossed = 0.5 * (stage[:, 0] - stage[:, 1])
        return np.append(straight_minus_crossed, 0.0) + np.insert(straight_plus_crossed, 0, 0.0)

    def delay_difference(self, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0, salt=0):
        """Arrival time of the top signal minus the bottom signal."""
        c = as_challenges(challenges, self.n)
        if noise.sigma_rel == 0:
            return parity_features(c) @ self.linear_weights(env)
        sel = selected_delays(self.entropy, c, env, noise, draw, salt)
        stage_diff = sel[:, 0, :] - sel[:, 1, :]
        sign = 1.0 - 2.0 * c
        # sign products of all later stages: stage i's contribution is flipped by every later crossing
        later = np.ones_like(sign)
        later[:, :-1] = np.cumprod(sign[:, :0:-1], axis=1)[:, ::-1]
        return (stage_diff * later).sum(axis=1)

    def evaluate(self, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0, salt=0):
        diff = self.delay_difference(challenges, env, noise, draw, salt)
        return (diff < 0).astype(np.uint8)

    def theta(self):
        return self.entropy.to_vector()

    def with_theta(self, theta):
        return ApufInstance(self.entropy.with_vector(theta))

    def __repr__(self):
        return f"ApufInstance(n={self.n})"


@dataclass(frozen=True)
class QuantizerTrace:
    ratio: np.ndarray
    scaled: np.ndarray
    toggle_count: np.ndarray
    response: np.ndarray


class NmqRoInstance:
    """Two challenge-dependent ring oscillators, a trap counter and a toggling bit.

    Oscillator p drives the trap counter, oscillator q the toggling bit; the
    response is ``LSB(floor(g * D_p / D_q))``.
    """

    architecture = NMQ_RO
    k = 1

    def __init__(self, entropy: EntropySource, g: int):
        if int(g) != g or g < 1:
            raise ValueError(f"g must be a positive integer, got {g}")
        self.entropy = entropy
        self.g = int(g)

    @property
    def n(self):
        return self.entropy.n

    def delays(self, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0, salt=0):
        d = effective_delays(self.entropy, challenges, env, noise, draw, salt)
        if not np.all(d > 0):
            raise ValueError("non-positive oscillator delay; broken instance configuration")
        return d

    def trace(self, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0, salt=0) -> QuantizerTrace:
        d = self.delays(challenges, env, noise, draw, salt)
        ratio = d[:, 0] / d[:, 1]
        scaled = self.g * ratio
        toggles = np.floor(scaled).astype(np.int64)
        return QuantizerTrace(ratio, scaled, toggles, (toggles & 1).astype(np.uint8))

    def evaluate(self, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0, salt=0):
        return self.trace(challenges, env, noise, draw, salt).response

    def theta(self):
        return self.entropy.to_vector()

    def with_theta(self, theta):
        return NmqRoInstance(self.entropy.with_vector(theta), self.g)

    def __repr__(self):
        return f"NmqRoInstance(n={self.n}, g={self.g})"


class XorComposition:
    """k instances of one architecture answering the same challenge, outputs XORed.

    Member ``j`` draws its jitter from salt ``j``, so a single-member
    composition reproduces its member exactly.
    """

    k: int

    def __init__(self, members):
        members = list(members)
        if not members:
            raise ValueError("composition needs at least one member")
        first = members[0]
        for m in members[1:]:
            if type(m) is not type(first):
                raise ValueError("members must share one architecture")
            if m.n != first.n:
                raise ValueError(f"members disagree on n: {m.n} != {first.n}")
            if m.g != first.g:
                raise ValueError(f"members disagree on g: {m.g} != {first.g}")
        self.members = tuple(members)
        self.k = len(members)
        self.architecture = XOR_APUF if isinstance(first, ApufInstance) else XOR_NMQ_RO

    @property
    def n(self):
        return self.members[0].n

    @property
    def g(self):
        return self.members[0].g

    def member_responses(self, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0):
        return np.stack([m.evaluate(challenges, env, noise, draw, salt=j) for j, m in enumerate(self.members)])

    def evaluate(self, challenges, env=ENROLLMENT, noise=NOISELESS, draw=0, salt=0):
        return np.bitwise_xor.reduce(self.member_responses(challenges, env, noise, draw), axis=0)

    def theta(self):
        return np.concatenate([m.theta() for m in self.members])

    def with_theta(self, theta):
        theta = np.asarray(theta)
        sizes = np.cumsum([len(m.theta()) for m in self.members])[:-1]
        return XorComposition(m.with_theta(t) for m, t in zip(self.members, np.split(theta, sizes)))

    def __repr__(self):
        return f"XorComposition(k={self.k}, {self.members[0]!r})"


def _squeeze(challenges, *arrays):
    if np.ndim(challenges) == 1:
        out = tuple(a[0] if isinstance(a, np.ndarray) else a for a in arrays)
    else:
        out = arrays
    return out[0] if len(out) == 1 else out


def eval_apuf(inst: ApufInstance, c, env=ENROLLMENT, noise=NOISELESS, draw=0):
    """Response bit(s) and top-minus-bottom delay difference(s)."""
    diff = inst.delay_difference(c, env, noise, draw)
    return _squeeze(c, (diff < 0).astype(np.uint8), diff)


def eval_nmq_ro(inst: NmqRoInstance, c, env=ENROLLMENT, noise=NOISELESS, draw=0):
    """Closed-form response and the full :class:`QuantizerTrace`."""
    tr = inst.trace(c, env, noise, draw)
    if np.ndim(c) == 1:
        tr = QuantizerTrace(*(a[0] for a in (tr.ratio, tr.scaled, tr.toggle_count, tr.response)))
    return tr.response, tr


def simulate_trap_counter(period_p, period_q, g: int):
    """Event-driven run of the trap counter and toggling bit.

    Both oscillators start phase-aligned at t=0 and rise first after one full
    period.  Events are consumed in time order; a toggle coinciding with the
    final counter edge is counted.  Returns ``(toggling_bit, toggle_count)``.
    """
    tp_period = np.atleast_1d(np.asarray(period_p, dtype=np.float64))
    tq_period = np.atleast_1d(np.asarray(period_q, dtype=np.float64))
    m = tp_period.shape[0]
    next_p = np.ones(m, dtype=np.int64)
    next_q = np.ones(m, dtype=np.int64)
    counter = np.zeros(m, dtype=np.int64)
    toggles = np.zeros(m, dtype=np.int64)
    bit = np.zeros(m, dtype=np.uint8)
    active = np.arange(m)
    while active.size:
        t_p = next_p[active] * tp_period[active]
        t_q = next_q[active] * tq_period[active]
        q_first = t_q <= t_p
        iq = active[q_first]
        toggles[iq] += 1
        bit[iq] ^= 1
        next_q[iq] += 1
        ip = active[~q_first]
        counter[ip] += 1
        next_p[ip] += 1
        active = np.concatenate([iq, ip[counter[ip] < g]])
    return bit, toggles


def eval_nmq_ro_event_oracle(inst: NmqRoInstance, c, env=ENROLLMENT, noise=NOISELESS, draw=0):
    """Response from the discrete-event oracle, plus the toggle count."""
    d = inst.delays(c, env, noise, draw)
    bit, toggles = simulate_trap_counter(2.0 * d[:, 0], 2.0 * d[:, 1], inst.g)
    return _squeeze(c, bit, toggles)


def eval_xor(comp: XorComposition, c, env=ENROLLMENT, noise=NOISELESS, draw=0):
    return _squeeze(c, comp.evaluate(c, env, noise, draw))


def toggle_gap(inst: NmqRoInstance, c, env=ENROLLMENT, noise=NOISELESS, draw=0):
    """Trap-counter final value minus number of toggles (not mean-centred)."""
    tr = inst.trace(c, env, noise, draw)
    return _squeeze(c, inst.g - tr.toggle_count)


def build_instance(architecture: str, sources, g: int = 0):
    """Assemble an instance from one entropy source per member."""
    sources = list(sources)
    if architecture == APUF:
        return ApufInstance(sources[0])
    if architecture == NMQ_RO:
        return NmqRoInstance(sources[0], g)
    if architecture == XOR_NMQ_RO:
        return XorComposition(NmqRoInstance(s, g) for s in sources)
    if architecture == XOR_APUF:
        return XorComposition(ApufInstance(s) for s in sources)
    raise ValueError(f"unknown architecture {architecture!r}")


def member_seeds(seed: int, k: int) -> list[int]:
    """Seed of each composition member; member 0 reuses ``seed`` itself."""
    spawned = np.random.SeedSequence([seed]).spawn(max(k - 1, 0))
    return [seed] + [int(s.generate_state(1, np.uint64)[0]) for s in spawned]


def make_puf(config, architecture: str = NMQ_RO, g: int = 200, k: int = 1, seed: int | None = None):
    """Sample a fresh instance of ``architecture`` from an :class:`InstanceConfig`."""
    from .entropy import sample_entropy_source

    if architecture not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {architecture!r}")
    seed = config.seed if seed is None else seed
    if architecture in (APUF, NMQ_RO):
        k = 1
    if k < 1:
        raise ValueError("k must be at least 1")
    sources = [sample_entropy_source(s, config) for s in member_seeds(seed, k)]
    return build_instance(architecture, sources, g)

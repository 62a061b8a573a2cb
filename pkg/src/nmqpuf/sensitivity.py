"""Uniqueness surfaces over two random directions in entropy-source space.

``f(alpha, beta)`` is the uniqueness between an instance with parameters
``theta0`` and one with ``theta0 + alpha * delta + beta * eta``.  Directions
are Gaussian and rescaled element-wise by ``|theta0|`` so every delay is
perturbed relative to its own size.  Evaluation is noiseless.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .entropy import InstanceConfig, random_challenges
from .metrics import uniqueness
from .models import APUF, NMQ_RO, XOR_APUF, XOR_NMQ_RO, make_puf

CLAMP_EPS = 1e-15


@dataclass(frozen=True)
class DirectionPair:
    delta: np.ndarray
    eta: np.ndarray
    seed: int

    @property
    def cosine(self) -> float:
        return float(self.delta @ self.eta / (np.linalg.norm(self.delta) * np.linalg.norm(self.eta)))


def random_directions(theta, seed: int, max_cosine: float = 0.99) -> DirectionPair:
    """Two relative-scaled Gaussian directions; ``theta`` may be a vector or a PUF."""
    if hasattr(theta, "theta"):
        theta = theta.theta()
    theta = np.asarray(theta, dtype=np.float64)
    scale = np.abs(theta)
    if not scale.any():
        raise ValueError("cannot scale directions by an all-zero parameter vector")
    rng = np.random.default_rng(seed)
    while True:
        pair = DirectionPair(rng.standard_normal(theta.size) * scale,
                             rng.standard_normal(theta.size) * scale, seed)
        if abs(pair.cosine) <= max_cosine:
            return pair


@dataclass
class SensitivityGrid:
    alphas: np.ndarray
    betas: np.ndarray
    values: np.ndarray  # values[i, j] = f(alphas[i], betas[j])
    n_challenges: int
    clamped_points: int = 0
    label: str = ""
    warnings: list = field(default_factory=list)

    def at(self, alpha: float, beta: float) -> float:
        i = int(np.argmin(np.abs(self.alphas - alpha)))
        j = int(np.argmin(np.abs(self.betas - beta)))
        return float(self.values[i, j])

    def boundary_ring(self) -> np.ndarray:
        v = self.values
        return np.concatenate([v[0, :], v[-1, :], v[1:-1, 0], v[1:-1, -1]])

    def boundary_ring_mean(self) -> float:
        return float(self.boundary_ring().mean())

    def fraction_below(self, level: float) -> float:
        return float(np.mean(self.values < level))

    def rows(self):
        for i, a in enumerate(self.alphas):
            for j, b in enumerate(self.betas):
                yield float(a), float(b), float(self.values[i, j])


def uniqueness_surface(puf, dirs: DirectionPair, alphas, betas, challenges, group_bits: int = 32,
                       label: str = "") -> SensitivityGrid:
    """Evaluate ``f`` on the ``alphas x betas`` grid against a fixed challenge set.

    Perturbations that push a delay to or below zero are clamped to a
    femtosecond and counted in ``clamped_points``.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    if alphas.size < 3 or betas.size < 3:
        raise ValueError("grid resolution must be at least 3x3")
    if len(challenges) < 1000:
        raise ValueError("challenge budget must be at least 1000")
    theta0 = puf.theta()
    if dirs.delta.shape != theta0.shape or dirs.eta.shape != theta0.shape:
        raise ValueError("direction vectors must match the parameter dimension")
    reference = puf.evaluate(challenges)
    values = np.empty((alphas.size, betas.size))
    clamped = 0
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            theta = theta0 + a * dirs.delta + b * dirs.eta
            bad = theta <= 0
            if bad.any():
                theta = np.where(bad, CLAMP_EPS, theta)
                clamped += 1
            values[i, j] = uniqueness(reference, puf.with_theta(theta).evaluate(challenges), group_bits)
    grid = SensitivityGrid(alphas, betas, values, len(challenges), clamped, label)
    if clamped:
        msg = f"{label or 'surface'}: {clamped} grid points had non-positive delays clamped to {CLAMP_EPS:g} s"
        grid.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return grid


@dataclass(frozen=True)
class SurfacePreset:
    name: str
    architecture: str
    g: int
    k: int
    radius: float


SURFACE_PRESETS = {
    "a": SurfacePreset("apuf", APUF, 0, 1, 0.25),
    "b": SurfacePreset("5-xor-apuf", XOR_APUF, 0, 5, 0.25),
    "c": SurfacePreset("nmq-ro-g800", NMQ_RO, 800, 1, 0.25),
    "d": SurfacePreset("nmq-ro-g200", NMQ_RO, 200, 1, 0.05),
    "e": SurfacePreset("2-xor-nmq-ro-g200", XOR_NMQ_RO, 200, 2, 0.05),
    "f": SurfacePreset("3-xor-nmq-ro-g200", XOR_NMQ_RO, 200, 3, 0.05),
}


def run_preset(preset: SurfacePreset | str, config: InstanceConfig = InstanceConfig(), resolution: int = 51,
               n_challenges: int = 10_000, instance_seed: int | None = None, direction_seed: int = 0,
               challenge_seed: int = 0) -> SensitivityGrid:
    """Build the instance for one panel and sweep ``[-radius, radius]^2``."""
    if isinstance(preset, str):
        preset = SURFACE_PRESETS.get(preset) or next(p for p in SURFACE_PRESETS.values() if p.name == preset)
    puf = make_puf(config, preset.architecture, preset.g, preset.k, instance_seed)
    axis = np.linspace(-preset.radius, preset.radius, resolution)
    challenges = random_challenges(n_challenges, config.n, challenge_seed)
    dirs = random_directions(puf, direction_seed)
    return uniqueness_surface(puf, dirs, axis, axis, challenges, label=preset.name)


def xor_sensitivity_means(config: InstanceConfig = InstanceConfig(), direction_seeds=range(10), g: int = 200,
                          radius: float = 0.05, resolution: int = 21, n_challenges: int = 10_000,
                          instance_seed: int | None = None):
    """Grid-mean uniqueness of 1-, 2- and 3-member NMQ-RO compositions per direction seed.

    The compositions are nested: member ``j`` is the same entropy source in
    each, and one direction pair is drawn for the 3-member parameter vector
    and truncated for the smaller ones.  Shared members therefore receive
    identical perturbations, so the three architectures differ only by the
    extra XORed members.  Returns an array of shape ``(len(direction_seeds), 3)``.
    """
    challenges = random_challenges(n_challenges, config.n, 0)
    axis = np.linspace(-radius, radius, resolution)
    pufs = [make_puf(config, NMQ_RO, g, 1, instance_seed), make_puf(config, XOR_NMQ_RO, g, 2, instance_seed),
            make_puf(config, XOR_NMQ_RO, g, 3, instance_seed)]
    out = []
    for ds in direction_seeds:
        full = random_directions(pufs[-1], ds)
        row = []
        for puf in pufs:
            size = puf.theta().size
            dirs = DirectionPair(full.delta[:size], full.eta[:size], ds)
            row.append(uniqueness_surface(puf, dirs, axis, axis, challenges).values.mean())
        out.append(row)
    return np.array(out)


def ordering_fraction(means) -> float:
    """Share of rows whose means are non-decreasing in the number of XORed members."""
    means = np.asarray(means)
    return float(np.mean(np.all(np.diff(means, axis=1) >= 0, axis=1)))

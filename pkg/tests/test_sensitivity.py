import warnings

import numpy as np
import pytest

from nmqpuf.entropy import InstanceConfig, random_challenges
from nmqpuf.metrics import uniqueness
from nmqpuf.models import APUF, NMQ_RO, make_puf
from nmqpuf.sensitivity import (
    SURFACE_PRESETS,
    random_directions,
    run_preset,
    uniqueness_surface,
)


@pytest.fixture(autouse=True)
def quiet_clamping():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


@pytest.mark.parametrize("key", sorted(SURFACE_PRESETS))
def test_origin_is_exactly_zero(key):
    grid = run_preset(key, resolution=5, n_challenges=1000)
    assert grid.at(0.0, 0.0) == 0.0
    assert np.all((grid.values >= 0) & (grid.values <= 1))


def test_surface_matches_direct_uniqueness():
    puf = make_puf(InstanceConfig(), NMQ_RO, 200)
    c = random_challenges(2000, 64, 0)
    dirs = random_directions(puf, 3)
    axis = np.array([-0.02, 0.0, 0.03])
    grid = uniqueness_surface(puf, dirs, axis, axis, c)
    ref = puf.evaluate(c)
    for i, a in enumerate(axis):
        for j, b in enumerate(axis):
            moved = puf.with_theta(puf.theta() + a * dirs.delta + b * dirs.eta)
            assert grid.values[i, j] == uniqueness(ref, moved.evaluate(c))


def test_directions_deterministic_and_scaled():
    theta = np.full(4001, 3.0)
    a, b = random_directions(theta, 5), random_directions(theta, 5)
    assert np.array_equal(a.delta, b.delta) and np.array_equal(a.eta, b.eta)
    halves = np.abs(a.delta).reshape(-1)[:4000].reshape(2, -1).mean(axis=1)
    assert halves[0] == pytest.approx(halves[1], rel=0.1)
    assert np.mean(np.abs(a.delta)) == pytest.approx(3.0 * np.sqrt(2 / np.pi), rel=0.05)


def test_direction_scale_is_relative():
    theta = np.concatenate([np.full(2000, 1.0), np.full(2000, 100.0)])
    d = random_directions(theta, 0).delta
    assert np.std(d[2000:]) / np.std(d[:2000]) == pytest.approx(100.0, rel=0.1)


def test_near_parallel_pairs_rejected():
    for seed in range(200):
        assert abs(random_directions(np.ones(2), seed).cosine) <= 0.99


def test_zero_parameters_rejected():
    with pytest.raises(ValueError):
        random_directions(np.zeros(10), 0)


def test_grid_and_budget_checks():
    puf = make_puf(InstanceConfig(), APUF)
    dirs = random_directions(puf, 0)
    c = random_challenges(1000, 64, 0)
    with pytest.raises(ValueError):
        uniqueness_surface(puf, dirs, [0, 1], [0, 1, 2], c)
    with pytest.raises(ValueError):
        uniqueness_surface(puf, dirs, [0, 1, 2], [0, 1, 2], c[:999])


def test_clamping_is_recorded():
    puf = make_puf(InstanceConfig(), APUF)
    dirs = random_directions(puf, 0)
    c = random_challenges(1000, 64, 0)
    axis = np.linspace(-3, 3, 3)
    with pytest.warns(RuntimeWarning, match="clamped"):
        grid = uniqueness_surface(puf, dirs, axis, axis, c)
    assert grid.clamped_points > 0 and grid.warnings


def test_apuf_corner_reaches_high_uniqueness():
    grid = run_preset("a", resolution=3, n_challenges=10_000)
    assert grid.at(0.25, 0.25) >= 0.4


def test_nmq_g800_saturates_faster_than_apuf():
    apuf = run_preset("a", resolution=11, n_challenges=2000)
    nmq = run_preset("c", resolution=11, n_challenges=2000)
    assert nmq.fraction_below(0.45) * 5 <= apuf.fraction_below(0.45)

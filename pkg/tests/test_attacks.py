import dataclasses

import numpy as np
import pytest
from scipy.linalg import hadamard
from scipy.optimize import linprog

from nmqpuf.attacks import (
    AttackReport,
    MlpConfig,
    MlpModel,
    cmaes_reliability_attack,
    evaluate_accuracy,
    fourier_low_degree_attack,
    gradient_check,
    parity_transform,
    train_logistic_regression,
    train_mlp,
)
from nmqpuf.attacks.cmaes import minimize
from nmqpuf.attacks.fourier import estimate_coefficients, low_degree_subsets, subset_count
from nmqpuf.attacks.logistic import LrConfig, fit_logistic
from nmqpuf.attacks.report import ConstantModel, OracleModel
from nmqpuf.dataset import CrpDataset, DatasetHeader, generate_dataset
from nmqpuf.entropy import InstanceConfig, random_challenges, unpack_challenges
from nmqpuf.models import APUF, NMQ_RO, make_puf

DESK = InstanceConfig(n=32)


def toy_dataset(challenges, responses, arch=APUF):
    n = challenges.shape[1]
    return CrpDataset(DatasetHeader(n, arch, 0, 1, 0, len(responses)), challenges, responses)


def toy_split(fn, n=16, m=6000, test=2000, seed=0):
    c = np.random.default_rng(seed).integers(0, 2, (m, n), dtype=np.uint8)
    return toy_dataset(c, fn(c)).split(test, seed=seed)


# -- features --------------------------------------------------------------------------


def test_parity_transform_examples():
    assert np.all(parity_transform(np.zeros((1, 64), dtype=np.uint8)) == 1)
    c = random_challenges(50, 64, 0)
    base = parity_transform(c)
    flipped = c.copy()
    flipped[:, 0] ^= 1
    diff = base != parity_transform(flipped)
    assert np.all(diff[:, 0]) and not diff[:, 1:].any()
    assert base.shape == (50, 65) and set(np.unique(base)) <= {-1.0, 1.0}


def test_noiseless_apuf_is_linearly_separable():
    puf = make_puf(InstanceConfig(), APUF)
    c = random_challenges(10_000, 64, 0)
    y = puf.evaluate(c)
    phi = parity_transform(c)
    sign = 1.0 - 2.0 * y  # +1 where w.phi must be >= 0
    res = linprog(np.zeros(65), A_ub=-(sign[:, None] * phi), b_ub=-np.ones(len(y)), bounds=[(None, None)] * 65,
                  method="highs")
    assert res.status == 0
    w, _ = fit_logistic(phi, y, LrConfig(epochs=5000, method="lbfgs"))
    assert np.mean(((phi @ w) < 0) == y) == 1.0


# -- logistic regression -----------------------------------------------------------------


def test_lr_on_apuf():
    ds = generate_dataset(InstanceConfig(), APUF, 0, 1, 12_000, seed=0)
    train, test = ds.split(2000, seed=0)
    model, rep = train_logistic_regression(train, test)
    assert rep.accuracy >= 0.95 and rep.overlap == 0 and rep.crp_budget == 10_000
    assert evaluate_accuracy(model, test) == rep.accuracy


def test_lr_on_nmq_is_chance():
    ds = generate_dataset(DESK, NMQ_RO, 200, 1, 120_000, seed=0)
    train, test = ds.split(20_000, seed=0)
    _, rep = train_logistic_regression(train, test)
    assert 0.48 <= rep.accuracy <= 0.55
    assert "parity feature map" in rep.notes


def test_lr_constant_target():
    train, test = toy_split(lambda c: np.zeros(len(c), dtype=np.uint8))
    _, rep = train_logistic_regression(train, test)
    assert rep.accuracy == 1.0


def test_lr_deterministic():
    train, test = toy_split(lambda c: c[:, 3])
    a = train_logistic_regression(train, test, seed=4)[1]
    b = train_logistic_regression(train, test, seed=4)[1]
    assert a.same_result(b)


# -- MLP -------------------------------------------------------------------------------------


def test_gradient_check_small_network():
    cfg = MlpConfig(hidden=(2,), dtype="float64", activation="tanh")
    model = MlpModel.init(3, cfg, seed=0)
    assert sum(w.size for w in model.weights) == 10
    x = np.random.default_rng(1).standard_normal((7, 3))
    y = np.array([0, 1, 1, 0, 1, 0, 0])
    assert gradient_check(model, x, y) < 1e-4


def test_gradient_check_relu_deeper():
    cfg = MlpConfig(hidden=(5, 4), dtype="float64")
    model = MlpModel.init(6, cfg, seed=2)
    x = np.random.default_rng(3).standard_normal((9, 6))
    assert gradient_check(model, x, np.arange(9) % 2) < 1e-4


def test_mlp_learns_xor_of_two_bits():
    train, test = toy_split(lambda c: c[:, 2] ^ c[:, 7], n=16, m=10_000, test=2000)
    _, rep = train_mlp(train, test, MlpConfig(hidden=(16, 16), learning_rate=1e-2, max_epochs=100, patience=20), seed=0)
    assert rep.accuracy == 1.0


def test_mlp_output_width_and_determinism():
    train, test = toy_split(lambda c: c[:, 0] & c[:, 1], n=16, m=3000, test=500)
    cfg = MlpConfig(hidden=(8,), max_epochs=3)
    m1, r1 = train_mlp(train, test, cfg, seed=5)
    m2, r2 = train_mlp(train, test, cfg, seed=5)
    assert m1.sizes == (16, 8, 2)
    assert r1.same_result(r2)
    assert all(np.array_equal(a, b) for a, b in zip(m1.params, m2.params))


def test_mlp_divergence_aborts_with_report():
    train, test = toy_split(lambda c: c[:, 0], n=16, m=2000, test=500)
    _, rep = train_mlp(train, test, MlpConfig(hidden=(8,), learning_rate=1e38, max_epochs=3), seed=0)
    assert rep.failed and "NaN" in rep.notes


def test_mlp_requires_hidden_layer():
    with pytest.raises(ValueError):
        MlpConfig(hidden=())


# -- CMA-ES -------------------------------------------------------------------------------


def test_cmaes_minimizes_sphere_and_rosenbrock():
    res = minimize(lambda X: (X ** 2).sum(axis=1), np.full(8, 3.0), 1.0, seed=0, max_generations=2000, tolx=1e-12)
    assert res.value < 1e-10

    def rosen(X):
        return np.sum(100 * (X[:, 1:] - X[:, :-1] ** 2) ** 2 + (1 - X[:, :-1]) ** 2, axis=1)

    res = minimize(rosen, np.zeros(5), 0.5, seed=1, max_generations=5000, tolx=1e-12)
    assert np.allclose(res.x, 1.0, atol=1e-4)


def test_cmaes_restarts_on_collapse():
    res = minimize(lambda X: np.zeros(len(X)), np.zeros(3), 1.0, seed=0, max_generations=1000, max_restarts=3)
    assert res.restarts == 3 and res.collapsed


def test_cmaes_noiseless_target_flags_failure():
    ds = generate_dataset(DESK, APUF, 0, 1, 500, seed=0, evals=11, noisy=False)
    train, test = ds.split(100, seed=0)
    model, rep = cmaes_reliability_attack(train, test)
    assert model is None and rep.failed and np.isnan(rep.accuracy)


def test_cmaes_needs_repeated_evaluations():
    ds = generate_dataset(DESK, APUF, 0, 1, 500, seed=0, evals=5)
    train, test = ds.split(100, seed=0)
    with pytest.raises(ValueError):
        cmaes_reliability_attack(train, test)


def test_cmaes_recovers_noisy_apuf():
    ds = generate_dataset(InstanceConfig(), APUF, 0, 1, 12_000, seed=0, evals=11)
    train, test = ds.split(2000, seed=0)
    _, rep = cmaes_reliability_attack(train, test, seed=0)
    assert rep.accuracy >= 0.90


def test_cmaes_fails_on_nmq():
    ds = generate_dataset(InstanceConfig(), NMQ_RO, 400, 1, 12_000, seed=0, evals=11)
    train, test = ds.split(2000, seed=0)
    _, rep = cmaes_reliability_attack(train, test, seed=0)
    assert 0.45 <= rep.accuracy <= 0.6


# -- Fourier ---------------------------------------------------------------------------------


def test_fourier_dictator_and_parity():
    train, test = toy_split(lambda c: c[:, 5])
    assert fourier_low_degree_attack(train, test, degree=1)[1].accuracy == 1.0
    train, test = toy_split(lambda c: c[:, 1] ^ c[:, 4] ^ c[:, 9], m=20_000, test=5000)
    assert abs(fourier_low_degree_attack(train, test, degree=2)[1].accuracy - 0.5) < 0.03
    assert fourier_low_degree_attack(train, test, degree=3)[1].accuracy == 1.0


def test_fourier_coefficients_match_walsh_hadamard():
    n = 8
    c = unpack_challenges(np.arange(2**n, dtype=np.uint64), n)
    f = np.random.default_rng(0).integers(0, 2, 2**n)
    model = estimate_coefficients(c, f, degree=2)
    # Sylvester ordering: row S, column x holds (-1)^{popcount(S & x)}
    spectrum = hadamard(2**n) @ (1 - 2 * f) / 2**n
    for subset, coef in zip(model.subsets, model.coefficients):
        mask = sum(1 << int(i) for i in subset if i < n)
        assert coef == pytest.approx(spectrum[mask], abs=1e-12)


def test_fourier_budget():
    assert subset_count(32, 2) == 529 and len(low_degree_subsets(32, 2)) == 529
    with pytest.raises(ValueError):
        low_degree_subsets(64, 4, max_subsets=10_000)


def test_fourier_on_nmq_is_chance():
    ds = generate_dataset(DESK, NMQ_RO, 200, 1, 220_000, seed=0)
    train, test = ds.split(20_000, seed=0)
    _, rep = fourier_low_degree_attack(train, test)
    assert 0.48 <= rep.accuracy <= 0.55


# -- accuracy and reports ------------------------------------------------------------------


def test_oracle_model_is_perfect():
    puf = make_puf(InstanceConfig(), NMQ_RO, 200)
    c = random_challenges(3000, 64, 0)
    assert evaluate_accuracy(OracleModel(puf), toy_dataset(c, puf.evaluate(c), NMQ_RO)) == 1.0


def test_random_guess_within_binomial_bound():
    c = random_challenges(10_000, 32, 0)
    y = np.random.default_rng(1).integers(0, 2, 10_000)
    acc = evaluate_accuracy(ConstantModel(1), toy_dataset(c, y))
    assert abs(acc - 0.5) <= 3 * np.sqrt(0.25 / 10_000)


def test_empty_test_set_rejected():
    with pytest.raises(ValueError):
        evaluate_accuracy(ConstantModel(0), toy_dataset(np.zeros((0, 8), np.uint8), np.zeros(0, np.uint8)))


def test_overlap_is_rejected():
    train, _ = toy_split(lambda c: c[:, 0])
    with pytest.raises(ValueError, match="also appear"):
        train_logistic_regression(train, train.subset(slice(0, 100)))


def test_report_serialisations():
    train, test = toy_split(lambda c: c[:, 0])
    _, rep = train_logistic_regression(train, test)
    assert len(rep.csv_row().split(",")) == len(AttackReport.csv_header().split(","))
    assert "accuracy" in rep.to_text() and "lr" in rep.table_line()
    other = dataclasses.replace(rep, wall_seconds=rep.wall_seconds + 5)
    assert rep.same_result(other) and rep != other

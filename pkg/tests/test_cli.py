import io
import time

import numpy as np
import pytest

from nmqpuf.cli import main
from nmqpuf.dataset import CrpDataset, DatasetHeader, read_dataset, write_dataset
from nmqpuf.entropy import parse_config


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    rc = main([str(a) for a in argv], out, err)
    return rc, out.getvalue(), err.getvalue()


def value(text, key):
    for line in text.splitlines():
        if line.startswith(key + " "):
            parts = line.replace(" : ", " ").split()
            return parts[1]
    raise KeyError(key)


def test_auth_simulate_defaults():
    rc, out, _ = run("auth", "simulate", "--ber", 0.10, "--crps", 200, "--threshold-rule", "paper",
                     "--trials", 200_000, "--required")
    assert rc == 0
    assert value(out, "threshold") == "170"
    assert 0.005 <= float(value(out, "failure_probability_exact")) <= 0.02
    assert 0.005 <= float(value(out, "failure_probability_monte_carlo")) <= 0.02
    assert value(out, "required_crps_for_0.01") == "194"
    assert "# seed=1" in out


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("NMQPUF_SEED", "77")
    rc, out, _ = run("instance", "new")
    assert rc == 0 and "# seed=77" in out and parse_config(value_block(out)).seed == 77
    monkeypatch.setenv("NMQPUF_SEED", "abc")
    rc, _, err = run("instance", "new")
    assert rc == 2 and err.startswith("error: type=usage")


def value_block(out):
    return "\n".join(line for line in out.splitlines() if not line.startswith("#"))


def test_unknown_flag_is_rejected():
    rc, out, err = run("auth", "simulate", "--ber", 0.1, "--crps", 200, "--bogus", 3)
    assert rc == 2 and out == ""
    assert err.startswith("error: type=usage message=") and "--bogus" in err


def test_missing_subcommand_and_bad_set():
    assert run()[0] == 2
    assert run("attack")[0] == 2
    rc, _, err = run("instance", "new", "--set", "nope=1")
    assert rc == 2 and "nope" in err


def test_runtime_errors_are_machine_readable(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"not a dataset at all, definitely not" * 3)
    rc, _, err = run("metrics", "uniformity", bad)
    assert rc == 1 and err.startswith("error: type=BadMagicError message=")
    rc, _, err = run("metrics", "uniformity", tmp_path / "missing.bin")
    assert rc == 1 and "FileNotFoundError" in err


def test_uniformity_of_all_zero_dataset(tmp_path):
    c = np.random.default_rng(0).integers(0, 2, (100, 16), dtype=np.uint8)
    ds = CrpDataset(DatasetHeader(16, "apuf", 0, 1, 0, 100), c, np.zeros(100, np.uint8))
    write_dataset(tmp_path / "zeros.bin", ds)
    rc, out, _ = run("metrics", "uniformity", tmp_path / "zeros.bin")
    assert rc == 0 and float(value(out, "uniformity")) == 0.0


def test_instance_config_file_roundtrip(tmp_path):
    path = tmp_path / "inst.cfg"
    assert run("instance", "new", "--seed", 9, "--set", "n=32", "--out", path)[0] == 0
    rc, out, _ = run("crp", "generate", "--config", path, "--crps", 50, "--out", tmp_path / "x.bin")
    assert rc == 0 and "# config n=32" in out and "# seed=9" in out
    assert read_dataset(tmp_path / "x.bin").header.n == 32


def test_attack_lr_on_generated_apuf(tmp_path):
    data = tmp_path / "apuf.bin"
    assert run("crp", "generate", "--arch", "apuf", "--crps", 12_000, "--out", data)[0] == 0
    t0 = time.perf_counter()
    rc, out, _ = run("attack", "lr", data, "--test-size", 2000, "--report", tmp_path / "r.csv")
    assert rc == 0 and time.perf_counter() - t0 <= 60
    acc = float(value(out, "accuracy"))
    assert acc >= 0.95
    assert int(value(out, "n_train")) == 10_000
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[0].startswith("kind,")


def test_generate_output_feeds_every_consumer(tmp_path):
    base = ("crp", "generate", "--set", "n=16", "--crps", 400, "--evals", 11, "--challenge-seed", 3)
    a, b = tmp_path / "a.bin", tmp_path / "b.csv"
    assert run(*base, "--seed", 1, "--out", a)[0] == 0
    assert run(*base, "--seed", 2, "--out", b)[0] == 0
    assert run("metrics", "uniformity", a)[0] == 0
    rc, out, _ = run("metrics", "uniqueness", a, b)
    assert rc == 0 and 0.3 <= float(value(out, "uniqueness")) <= 0.7
    for kind, extra in (("lr", ()), ("fourier", ("--degree", 1)), ("mlp", ("--hidden", 8, "--epochs", 2)),
                        ("cmaes", ("--generations", 5))):
        rc, out, err = run("attack", kind, a, "--test-size", 0.25, *extra)
        assert rc == 0, err
        assert value(out, "kind") == kind and value(out, "overlap") == "0"


def test_uniqueness_requires_matching_challenges(tmp_path):
    for seed in (1, 2):
        run("crp", "generate", "--set", "n=16", "--crps", 64, "--challenge-seed", seed, "--out", tmp_path / f"{seed}.bin")
    rc, _, err = run("metrics", "uniqueness", tmp_path / "1.bin", tmp_path / "2.bin")
    assert rc == 1 and "same challenges" in err


def test_same_seed_reproduces_files(tmp_path):
    for name in ("x.bin", "y.bin"):
        run("crp", "generate", "--seed", 5, "--crps", 500, "--out", tmp_path / name)
    assert (tmp_path / "x.bin").read_bytes() == (tmp_path / "y.bin").read_bytes()


def test_metrics_ber_prints_table():
    rc, out, _ = run("metrics", "ber", "--g", 200, "--challenges", 500, "--evals", 3, "--temperatures", 0, 20)
    assert rc == 0
    rows = [line for line in out.splitlines() if line[:1].isdigit()]
    assert len(rows) == 2 and 0 < float(value(out, "worst")) < 0.3


def test_sensitivity_map_writes_contour(tmp_path):
    rc, out, _ = run("sensitivity", "map", "--preset", "d", "--resolution", 3, "--challenges", 1000,
                     "--out", tmp_path / "s.csv")
    assert rc == 0 and "f00=0.000000" in out
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "alpha,beta,f" and len(lines) == 10


@pytest.mark.parametrize("fig", ["fig2", "fig3"])
def test_plotdata_cli(fig, tmp_path):
    rc, out, _ = run("plotdata", fig, "--out", tmp_path / "p.csv")
    assert rc == 0 and "wrote" in out
    text = (tmp_path / "p.csv").read_text()
    assert "# config: " in text and "# figure: " + fig in text

"""Tabular data behind the standard figures, written as headered CSV.

Every emitter returns ``(columns, rows)``; :func:`write_csv` adds a ``#``
comment block with the settings that produced the table.
"""

from __future__ import annotations

import csv
import sys

import numpy as np

from .entropy import InstanceConfig, format_config, random_challenges
from .metrics import BER_TEMPERATURES, auth_curve, bit_error_rate, enroll, pairwise_uniqueness, collect, uniformity
from .models import APUF, NMQ_RO, make_puf
from .sensitivity import run_preset


def write_csv(columns, rows, out=None, meta: dict | None = None) -> None:
    """Write to the path or file object ``out`` (stdout when None)."""
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", newline="") as fh:
            return write_csv(columns, rows, fh, meta)
    out = out or sys.stdout
    for k, v in (meta or {}).items():
        for line in str(v).splitlines() or [""]:
            out.write(f"# {k}: {line}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)


def auth_failure_curves(bers=(0.1, 0.2, 0.3), max_crps: int = 1000, step: int = 10, margin: float = 0.05):
    """Exact failure probability versus CRP count for each BER."""
    rows = auth_curve(bers, range(step, max_crps + 1, step), margin)
    return ("ber", "n_crps", "threshold", "failure_prob"), rows


def response_geometry(config: InstanceConfig = InstanceConfig(), g: int = 400, n_challenges: int = 1000,
                      challenge_seed: int = 0, architecture: str = NMQ_RO):
    """Quantizer input and response per challenge, sorted along the quantizer input.

    For NMQ-RO the columns are ``(challenge_index, ratio, scaled, response)``;
    for the arbiter PUF ``(challenge_index, delay_difference, response)``.
    """
    c = random_challenges(n_challenges, config.n, challenge_seed)
    puf = make_puf(config, architecture, g)
    if architecture == APUF:
        diff = puf.delay_difference(c)
        order = np.argsort(diff, kind="stable")
        resp = (diff < 0).astype(np.uint8)
        return ("challenge_index", "delay_difference", "response"), [
            (int(i), float(diff[i]), int(resp[i])) for i in order]
    tr = puf.trace(c)
    order = np.argsort(tr.ratio, kind="stable")
    return ("challenge_index", "ratio", "scaled", "response"), [
        (int(i), float(tr.ratio[i]), float(tr.scaled[i]), int(tr.response[i])) for i in order]


def alternations(responses) -> int:
    """Number of 0/1 changes along a response sequence."""
    r = np.asarray(responses)
    return int(np.count_nonzero(r[1:] != r[:-1]))


def ber_versus_temperature(config: InstanceConfig = InstanceConfig(), g_values=(100, 200, 400),
                           temperatures=BER_TEMPERATURES, n_challenges: int = 10_000, evals: int = 10,
                           challenge_seed: int = 0):
    c = random_challenges(n_challenges, config.n, challenge_seed)
    noise = config.noise()
    rows = []
    for g in g_values:
        puf = make_puf(config, NMQ_RO, g)
        rep = bit_error_rate(puf, enroll(puf, c, noise), temperatures, evals, noise)
        rows += [(g, float(t), float(b)) for t, b in zip(rep.temperatures, rep.error_ratio)]
    return ("g", "temperature", "ber"), rows


def toggle_gaps(config: InstanceConfig = InstanceConfig(), g_values=(100, 200, 400, 800),
                n_challenges: int = 10_000, challenge_seed: int = 0):
    """Trap-counter final value minus toggles, one row per (g, challenge)."""
    c = random_challenges(n_challenges, config.n, challenge_seed)
    rows = []
    for g in g_values:
        puf = make_puf(config, NMQ_RO, g)
        gap = g - puf.trace(c).toggle_count
        rows += [(g, int(i), int(v)) for i, v in enumerate(gap)]
    return ("g", "challenge_index", "gap"), rows


def gap_std(config: InstanceConfig = InstanceConfig(), g_values=(100, 200, 400, 800), n_challenges: int = 100_000,
            challenge_seed: int = 0) -> dict:
    c = random_challenges(n_challenges, config.n, challenge_seed)
    return {g: float(np.std(g - make_puf(config, NMQ_RO, g).trace(c).toggle_count)) for g in g_values}


def quality_histograms(config: InstanceConfig = InstanceConfig(), g: int = 200, instances: int = 20,
                       n_challenges: int = 10_000, challenge_seed: int = 0, group_bits: int = 32):
    """Per-instance uniformity and all-pairs uniqueness, as ``(metric, value)`` rows."""
    c = random_challenges(n_challenges, config.n, challenge_seed)
    sets = [collect(make_puf(config, NMQ_RO, g, seed=config.seed + i), c) for i in range(instances)]
    rows = [("uniformity", uniformity(s)) for s in sets]
    rows += [("uniqueness", float(u)) for u in pairwise_uniqueness(sets, group_bits)]
    return ("metric", "value"), rows


def sensitivity_contour(preset: str = "a", config: InstanceConfig = InstanceConfig(), resolution: int = 51,
                        n_challenges: int = 10_000, direction_seed: int = 0):
    grid = run_preset(preset, config, resolution, n_challenges, direction_seed=direction_seed)
    return ("alpha", "beta", "f"), list(grid.rows())


FIGURES = {
    "fig2": auth_failure_curves,
    "fig3": response_geometry,
    "fig5": ber_versus_temperature,
    "fig7": toggle_gaps,
    "fig9": quality_histograms,
    "fig10": sensitivity_contour,
}


def config_meta(config: InstanceConfig, **extra) -> dict:
    return {"config": format_config(config), **extra}


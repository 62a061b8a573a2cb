"""Command-line entry point: ``nmqpuf <group> <command> [options]``.

Every command prints the resolved instance configuration and seed as ``#``
lines before its output, so a run can be repeated from its own log.  The
default seed comes from ``NMQPUF_SEED`` when set, else 1.  Failures print
one ``error: type=<kind> message=<text>`` line on stderr and exit nonzero
(2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import plotdata
from .attacks import cmaes, fourier, logistic, mlp
from .dataset import DatasetError, generate_dataset, read_dataset, write_dataset
from .entropy import InstanceConfig, EnvironmentCondition, format_config, random_challenges, read_config, write_config
from .metrics import (BER_TEMPERATURES, auth_failure_probability, bit_error_rate, enroll, margin_threshold,
                      required_crps, uniformity, uniqueness)
from .models import ARCHITECTURES, NMQ_RO, make_puf
from .sensitivity import SURFACE_PRESETS, run_preset

SEED_ENV = "NMQPUF_SEED"
CONFIG_FIELDS = InstanceConfig.__dataclass_fields__


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 1
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _config_args(p):
    p.add_argument("--config", help="instance config file (key=value)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config field; repeatable")
    p.add_argument("--seed", type=int, help=f"instance seed (default: config, else ${SEED_ENV}, else 1)")


def _puf_args(p, g=200):
    p.add_argument("--arch", choices=ARCHITECTURES, default=NMQ_RO)
    p.add_argument("--g", type=int, default=g)
    p.add_argument("--k", type=int, default=1)


def resolve_config(args) -> InstanceConfig:
    cfg = read_config(args.config) if args.config else InstanceConfig(seed=default_seed())
    changes = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or key not in CONFIG_FIELDS:
            raise UsageError(f"bad --set {item!r}; keys: {', '.join(CONFIG_FIELDS)}")
        changes[key] = int(value, 0) if CONFIG_FIELDS[key].type == "int" else float(value)
    if args.seed is not None:
        changes["seed"] = args.seed
    return cfg.replace(**changes)


def announce(out, config: InstanceConfig | None = None, **fields):
    if config is not None:
        for line in format_config(config).splitlines():
            out.write(f"# config {line}\n")
    for k, v in fields.items():
        out.write(f"# {k}={v}\n")


# -- commands ---------------------------------------------------------------


def cmd_instance_new(args, out):
    cfg = resolve_config(args)
    announce(out, cfg, seed=cfg.seed)
    if args.out:
        write_config(args.out, cfg)
        out.write(f"wrote {args.out}\n")
    else:
        out.write(format_config(cfg))


def cmd_crp_generate(args, out):
    cfg = resolve_config(args)
    env = EnvironmentCondition(args.temperature)
    announce(out, cfg, seed=cfg.seed, challenge_seed=args.challenge_seed, arch=args.arch, g=args.g, k=args.k,
             crps=args.crps, evals=args.evals, temperature=args.temperature, noisy=not args.noiseless)
    ds = generate_dataset(cfg, args.arch, args.g, args.k, args.crps, args.challenge_seed, env, args.evals,
                          noisy=not args.noiseless)
    write_dataset(args.out, ds, args.format)
    out.write(f"wrote {len(ds)} records to {args.out}\n")


def cmd_metrics_uniformity(args, out):
    ds = read_dataset(args.dataset)
    announce(out, dataset=args.dataset, header=ds.header.describe())
    out.write(f"uniformity {uniformity(ds.responses):.6f}\n")


def cmd_metrics_uniqueness(args, out):
    a, b = read_dataset(args.dataset[0]), read_dataset(args.dataset[1])
    announce(out, a=a.header.describe(), b=b.header.describe(), group_bits=args.group_bits)
    if not np.array_equal(a.packed, b.packed):
        raise DatasetError("uniqueness needs both datasets to hold the same challenges in the same order")
    out.write(f"uniqueness {uniqueness(a.responses, b.responses, args.group_bits):.6f}\n")


def cmd_metrics_ber(args, out):
    cfg = resolve_config(args)
    announce(out, cfg, seed=cfg.seed, arch=args.arch, g=args.g, k=args.k, challenges=args.challenges,
             evals=args.evals, challenge_seed=args.challenge_seed)
    puf = make_puf(cfg, args.arch, args.g, args.k)
    c = random_challenges(args.challenges, cfg.n, args.challenge_seed)
    noise = cfg.noise()
    rep = bit_error_rate(puf, enroll(puf, c, noise), args.temperatures, args.evals, noise)
    out.write("temperature,ber\n")
    for t, b in zip(rep.temperatures, rep.error_ratio):
        out.write(f"{t:g},{b:.6f}\n")
    out.write(f"worst {rep.worst:.6f}\n")


def cmd_auth_simulate(args, out):
    seed = default_seed() if args.seed is None else args.seed
    if args.threshold_rule in ("margin", "paper"):
        threshold = margin_threshold(args.ber, args.crps, args.margin)
    else:
        try:
            threshold = int(args.threshold_rule)
        except ValueError:
            raise UsageError("--threshold-rule must be 'margin' (alias 'paper') or an integer") from None
    announce(out, seed=seed, ber=args.ber, crps=args.crps, margin=args.margin, trials=args.trials)
    res = auth_failure_probability(args.ber, args.crps, threshold, args.trials, seed)
    out.write(f"threshold {threshold}\n")
    out.write(f"failure_probability_exact {res.exact:.6g}\n")
    out.write(f"failure_probability_monte_carlo {res.monte_carlo:.6g}\n")
    if args.required:
        out.write(f"required_crps_for_{args.target:g} {required_crps(args.ber, args.target, args.margin)}\n")


def cmd_sensitivity_map(args, out):
    cfg = resolve_config(args)
    preset = SURFACE_PRESETS[args.preset]
    announce(out, cfg, seed=cfg.seed, preset=f"{args.preset} ({preset.name})", resolution=args.resolution,
             challenges=args.challenges, direction_seed=args.direction_seed)
    grid = run_preset(preset, cfg, args.resolution, args.challenges, direction_seed=args.direction_seed)
    target = open(args.out, "w", newline="") if args.out else out
    try:
        plotdata.write_csv(("alpha", "beta", "f"), grid.rows(), target)
    finally:
        if args.out:
            target.close()
    out.write(f"# boundary_ring_mean={grid.boundary_ring_mean():.6f} f00={grid.at(0, 0):.6f} "
              f"below_0.45={grid.fraction_below(0.45):.4f}\n")


def _attack_data(args):
    train = read_dataset(args.train)
    if args.test:
        return train, read_dataset(args.test)
    size = int(args.test_size) if args.test_size >= 1 else args.test_size
    return train.split(size, seed=args.seed)


def cmd_attack(args, out):
    if args.seed is None:
        args.seed = default_seed()
    train, test = _attack_data(args)
    announce(out, seed=args.seed, train=args.train, target=train.header.describe(), n_train=len(train),
             n_test=len(test))
    if args.kind == "lr":
        _, rep = logistic.train_logistic_regression(train, test, logistic.LrConfig(args.lr, args.epochs), args.seed)
    elif args.kind == "fourier":
        _, rep = fourier.fourier_low_degree_attack(train, test, args.degree, args.seed)
    elif args.kind == "mlp":
        cfg = mlp.MlpConfig(hidden=tuple(args.hidden), learning_rate=args.lr, max_epochs=args.epochs,
                            batch_size=args.batch_size, patience=args.patience)
        log = (lambda s: out.write(f"# {s}\n")) if args.verbose else None
        _, rep = mlp.train_mlp(train, test, cfg, args.seed, log)
    else:
        _, rep = cmaes.cmaes_reliability_attack(train, test, args.seed, max_generations=args.generations)
    out.write(rep.to_text() + "\n")
    out.write(rep.table_line() + "\n")
    if args.report:
        new = not os.path.exists(args.report)
        with open(args.report, "a") as fh:
            if new:
                fh.write(rep.csv_header() + "\n")
            fh.write(rep.csv_row() + "\n")


def cmd_plotdata(args, out):
    cfg = resolve_config(args)
    kwargs = {}
    if args.figure != "fig2":
        kwargs["config"] = cfg
    if args.figure == "fig3":
        kwargs.update(g=args.g, architecture=args.arch)
    if args.figure == "fig10":
        kwargs.update(preset=args.preset, resolution=args.resolution)
    announce(out, cfg if args.figure != "fig2" else None, seed=cfg.seed, figure=args.figure,
             **{k: v for k, v in kwargs.items() if k != "config"})
    cols, rows = plotdata.FIGURES[args.figure](**kwargs)
    if args.out:
        plotdata.write_csv(cols, rows, args.out, plotdata.config_meta(cfg, figure=args.figure))
        out.write(f"wrote {len(rows)} rows to {args.out}\n")
    else:
        plotdata.write_csv(cols, rows, out)


# -- parser -----------------------------------------------------------------


def build_parser() -> Parser:
    root = Parser(prog="nmqpuf", description="Delay-PUF simulation, metrics and attack workbench.")
    groups = root.add_subparsers(dest="group", required=True, parser_class=Parser)

    inst = groups.add_parser("instance").add_subparsers(dest="command", required=True, parser_class=Parser)
    p = inst.add_parser("new", help="write an instance config")
    _config_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_instance_new)

    crp = groups.add_parser("crp").add_subparsers(dest="command", required=True, parser_class=Parser)
    p = crp.add_parser("generate", help="sample an instance and write a CRP dataset")
    _config_args(p)
    _puf_args(p)
    p.add_argument("--crps", type=int, default=10_000)
    p.add_argument("--challenge-seed", type=int, default=0)
    p.add_argument("--temperature", type=float, default=20.0)
    p.add_argument("--evals", type=int, default=1, help="evaluations per challenge")
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--format", choices=("bin", "csv"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_crp_generate)

    met = groups.add_parser("metrics").add_subparsers(dest="command", required=True, parser_class=Parser)
    p = met.add_parser("uniformity")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_metrics_uniformity)
    p = met.add_parser("uniqueness")
    p.add_argument("dataset", nargs=2)
    p.add_argument("--group-bits", type=int, default=32)
    p.set_defaults(func=cmd_metrics_uniqueness)
    p = met.add_parser("ber")
    _config_args(p)
    _puf_args(p)
    p.add_argument("--challenges", type=int, default=10_000)
    p.add_argument("--challenge-seed", type=int, default=0)
    p.add_argument("--evals", type=int, default=20)
    p.add_argument("--temperatures", type=float, nargs="+", default=list(BER_TEMPERATURES))
    p.set_defaults(func=cmd_metrics_ber)

    auth = groups.add_parser("auth").add_subparsers(dest="command", required=True, parser_class=Parser)
    p = auth.add_parser("simulate")
    p.add_argument("--ber", type=float, required=True)
    p.add_argument("--crps", type=int, required=True)
    p.add_argument("--threshold-rule", default="margin",
                   help="'margin' (alias 'paper'): --margin below 1-BER, rounded down; or an explicit integer")
    p.add_argument("--margin", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--required", action="store_true", help="also report CRPs needed for --target")
    p.add_argument("--target", type=float, default=0.01)
    p.set_defaults(func=cmd_auth_simulate)

    sens = groups.add_parser("sensitivity").add_subparsers(dest="command", required=True, parser_class=Parser)
    p = sens.add_parser("map")
    _config_args(p)
    p.add_argument("--preset", choices=sorted(SURFACE_PRESETS), default="a")
    p.add_argument("--resolution", type=int, default=51)
    p.add_argument("--challenges", type=int, default=10_000)
    p.add_argument("--direction-seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sensitivity_map)

    att = groups.add_parser("attack").add_subparsers(dest="kind", required=True, parser_class=Parser)
    defaults = {"lr": (0.1, 100), "mlp": (1e-3, 30), "fourier": (None, None), "cmaes": (None, None)}
    for kind, (lr, epochs) in defaults.items():
        p = att.add_parser(kind)
        p.add_argument("train", help="CRP dataset (binary or .csv)")
        p.add_argument("--test", help="separate held-out dataset; default: split off --test-size")
        p.add_argument("--test-size", type=float, default=0.2, help="count (>=1) or fraction of distinct challenges")
        p.add_argument("--seed", type=int)
        p.add_argument("--report", help="append the report as a CSV row to this file")
        if lr is not None:
            p.add_argument("--lr", type=float, default=lr)
            p.add_argument("--epochs", type=int, default=epochs)
        if kind == "mlp":
            p.add_argument("--hidden", type=int, nargs="+", default=[128, 128, 128, 128])
            p.add_argument("--batch-size", type=int, default=256)
            p.add_argument("--patience", type=int, default=5)
            p.add_argument("--verbose", action="store_true")
        if kind == "fourier":
            p.add_argument("--degree", type=int, default=2)
        if kind == "cmaes":
            p.add_argument("--generations", type=int, default=500)
        p.set_defaults(func=cmd_attack)

    plot = groups.add_parser("plotdata").add_subparsers(dest="figure", required=True, parser_class=Parser)
    for fig in plotdata.FIGURES:
        p = plot.add_parser(fig)
        _config_args(p)
        p.add_argument("--out")
        if fig == "fig3":
            _puf_args(p, g=400)
        if fig == "fig10":
            p.add_argument("--preset", choices=sorted(SURFACE_PRESETS), default="a")
            p.add_argument("--resolution", type=int, default=51)
        p.set_defaults(func=cmd_plotdata)
    return root


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        t0 = time.perf_counter()
        args.func(args, out)
        out.write(f"# elapsed_seconds={time.perf_counter() - t0:.3f}\n")
        return 0
    except UsageError as e:
        err.write(f"error: type=usage message={e}\n")
        return 2
    except (ValueError, OSError, KeyError) as e:
        err.write(f"error: type={type(e).__name__} message={e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

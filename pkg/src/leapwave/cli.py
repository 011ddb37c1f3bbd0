"""Command-line front end for single runs, ladder sweeps and self-checks.

`leapwave` runs one configuration (or a sweep with --sweep) and writes the
CSV; `leapwave rates FILE` prints the convergence-order table of an emitted
CSV; `leapwave selftest` exercises the driver invariants on a tiny
configuration.  Flags override values from an optional key=value config file.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile

from .harness import (
    RATE_COLUMNS,
    RunConfig,
    cfl_alpha,
    derived_tau,
    emit_csv,
    rate_table,
    read_csv,
    run_experiment,
    sweep,
)

_FLAG_TYPES = {
    "benchmark": str,
    "degree": int,
    "cells": int,
    "rho": float,
    "cfl_ratio": float,
    "time_mode": str,
    "tstar": float,
    "out": str,
    "sweep": str,
    "alpha_probe": int,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="leapwave",
        description="Wave-equation benchmark runs with error and estimator tables.",
    )
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run one configuration or a cell sweep")
    run.add_argument("--benchmark", choices=("standing", "propagating"))
    run.add_argument("--degree", type=int, choices=(1, 2, 3))
    run.add_argument("--cells", type=int)
    run.add_argument("--rho", type=float)
    run.add_argument("--cfl-ratio", type=float, dest="cfl_ratio")
    run.add_argument("--time-mode", choices=("cfl", "scaled"), dest="time_mode")
    run.add_argument("--tstar", type=float)
    run.add_argument("--out")
    run.add_argument("--config", help="key=value file; command-line flags win")
    run.add_argument("--sweep", help="comma-separated cell ladder")
    run.add_argument("--alpha-probe", type=int, dest="alpha_probe",
                     help="steps for the CFL threshold probe")

    rates = sub.add_parser("rates", help="print the order table of an emitted CSV")
    rates.add_argument("csv", help="path of a file written by a run")

    sub.add_parser("selftest", help="run the driver invariant checks")
    return parser


def _read_config_file(path):
    values = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}, line {lineno}: expected key=value")
            key, text = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FLAG_TYPES:
                raise ValueError(f"{path}, line {lineno}: unknown key {key!r}")
            values[key] = _FLAG_TYPES[key](text)
    return values


def _merge_options(args):
    merged = dict.fromkeys(_FLAG_TYPES)
    if args.config:
        merged.update(_read_config_file(args.config))
    for key in _FLAG_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _config_from(merged):
    fields = dict(
        benchmark=merged["benchmark"],
        degree=merged["degree"],
        n_cells=merged["cells"],
        rho=merged["rho"],
        cfl_ratio=merged["cfl_ratio"],
        time_mode=merged["time_mode"],
        t_star=merged["tstar"],
        out=merged["out"],
    )
    return RunConfig(**{k: v for k, v in fields.items() if v is not None})


def _print_records(records):
    header = f"{'h':>12s} {'tau':>12s} {'e_w':>12s} {'E_rho':>12s} {'Lambda':>12s} {'eff':>8s}"
    print(header)
    for rec in records:
        print(
            f"{rec.h:12.5e} {rec.tau:12.5e} {rec.e_w:12.5e} "
            f"{rec.E_rho:12.5e} {rec.Lambda:12.5e} {rec.effectivity:8.3f}"
            + ("" if rec.status == "ok" else f"  [{rec.status}]")
        )


def _print_rates(rates):
    names = [name for name in RATE_COLUMNS if any(map(math.isfinite, rates[name]))]
    if not names:
        print("no rate data (need at least two runs)")
        return
    steps = len(next(iter(rates.values())))
    print("order " + " ".join(f"{name:>8s}" for name in names))
    for i in range(steps):
        row = " ".join(
            f"{rates[name][i]:8.3f}" if math.isfinite(rates[name][i]) else f"{'--':>8s}"
            for name in names
        )
        print(f"{i + 1:5d} " + row)


def _cmd_run(args):
    merged = _merge_options(args)
    if merged["alpha_probe"]:
        cfl_alpha(merged["degree"] or RunConfig().degree, merged["alpha_probe"])
    config = _config_from(merged)
    if merged["sweep"]:
        ladder = [int(part) for part in merged["sweep"].split(",") if part]
        records, rates = sweep(config, ladder)
        _print_records(records)
        _print_rates(rates)
    else:
        record = run_experiment(config)
        if config.out:
            emit_csv([record], config.out)
        _print_records([record])
        if record.status != "ok":
            return 1
    return 0


def _cmd_rates(args):
    records = read_csv(args.csv)
    if len(records) < 2:
        print("no rate data (need at least two runs)")
        return 0
    _print_rates(rate_table(records))
    return 0


def _cmd_selftest():
    failures = 0

    def check(label, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {label}")
        failures += not ok

    config = RunConfig(
        benchmark="standing", degree=1, n_cells=4, rho=0.05, cfl_ratio=0.9,
        t_star=250.0,
    )
    first = run_experiment(config)
    again = run_experiment(config)
    check("smoke run finishes", first.status == "ok" and math.isfinite(first.e_w))
    check(
        "identical configs reproduce the record",
        all(
            getattr(first, name) == getattr(again, name)
            for name in ("e_w", "E_rho", "R", "M", "Lambda", "effectivity")
        ),
    )
    check(
        "estimator total matches its parts",
        math.isclose(
            first.Lambda**2, first.R**2 + 20.0 * first.M**2, rel_tol=1e-12
        ),
    )
    fd, path = tempfile.mkstemp(suffix=".csv")
    os.close(fd)
    try:
        emit_csv([first, again], path)
        back = read_csv(path)
        check(
            "CSV round trip is bitwise",
            all(
                getattr(back[0], name) == getattr(first, name)
                for name in ("h", "tau", "e_w", "E_rho", "R", "M", "Lambda")
            ),
        )
    finally:
        os.unlink(path)
    scaled = [
        derived_tau(RunConfig(degree=1, n_cells=n, time_mode="scaled", rho=0.05,
                              t_star=250.0))
        for n in (4, 8, 16)
    ]
    consts = [t**2 / (20.0 / n) ** 3 for t, n in zip(scaled, (4, 8, 16))]
    check(
        "scaled mode keeps tau^2 / h^3 constant",
        max(consts) - min(consts) <= 1e-12 * max(consts),
    )
    print("selftest:", "ok" if failures == 0 else f"{failures} failure(s)")
    return 1 if failures else 0


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0].startswith("-"):
        argv.insert(0, "run")
    args = _build_parser().parse_args(argv)
    if args.command == "rates":
        return _cmd_rates(args)
    if args.command == "selftest":
        return _cmd_selftest()
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())

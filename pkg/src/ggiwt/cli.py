"""Command-line entry point.

    ggiwt run --scenario 1 --filters all --runs 100 --seed 42 --out results/
    ggiwt validate config.json

Exit status: 0 on success, 1 on configuration errors, 2 on runtime failures.
The output directory defaults to $GGIWT_OUT, then ``results``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import config
from .errors import ConfigError
from .sim import monte_carlo

log = logging.getLogger("ggiwt")

OUT_ENV = "GGIWT_OUT"
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_metrics(path, result):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scan", "filter", "total_rms", "c_l", "c_m", "c_f", "c_t"])
        for f in result.filters:
            rep = result.rms[f]
            for k in range(len(rep)):
                w.writerow([k, f] + [fmt(getattr(rep, c)[k]) for c in ("total", "c_l", "c_m", "c_f", "c_t")])


def write_cardinality(path, result):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scan", "filter", "mean_card", "true_card"])
        for f in result.filters:
            rep = result.rms[f]
            for k in range(len(rep)):
                w.writerow([k, f, fmt(rep.est_card[k]), fmt(rep.true_card[k])])


def write_trajectories(path, result):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f in result.filters:
            for run, trajs in enumerate(result.final[f]):
                for tr in trajs:
                    fh.write(json.dumps({"run": run, "filter": f, **tr.to_json()}) + "\n")


def read_metrics(path):
    """Parse metrics.csv back into {filter: {column: [values per scan]}}."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            cols = out.setdefault(row["filter"], {c: [] for c in ("total_rms", "c_l", "c_m", "c_f", "c_t")})
            for c in cols:
                cols[c].append(float(row[c]))
    return out


def read_cardinality(path):
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            cols = out.setdefault(row["filter"], {"mean_card": [], "true_card": []})
            for c in cols:
                cols[c].append(float(row[c]))
    return out


def _overrides(args) -> dict:
    run, scenario = {}, {}
    if args.scenario is not None:
        scenario["id"] = args.scenario
    for key in ("filters", "runs", "seed", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            run[key] = val
    out = {}
    if run:
        out["run"] = run
    if scenario:
        out["scenario"] = scenario
    return out


def _report_config_error(exc: ConfigError):
    print("configuration error:", file=sys.stderr)
    for p in exc.problems:
        print(f"  - {p}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        settings = config.load(args.config, _overrides(args))
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    out = Path(args.out or os.environ.get(OUT_ENV) or "results")
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"output directory {out} is not writable")
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run = settings.run
        t0 = time.perf_counter()
        result = monte_carlo(settings.scenario, run.filter_names, run.runs, run.seed, run.workers)
        log.info("%d runs of scenario %d in %.1f s", run.runs, settings.scenario.scenario,
                 time.perf_counter() - t0)
        write_metrics(out / "metrics.csv", result)
        write_cardinality(out / "cardinality.csv", result)
        write_trajectories(out / "trajectories.jsonl", result)
        (out / "manifest.json").write_text(config.dumps(settings), encoding="utf-8")
    except Exception as exc:  # noqa: BLE001 - report any runtime failure with exit 2
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote results to {out}")
    return 0


def cmd_validate(args) -> int:
    try:
        settings = config.load(args.config or args.path)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    sys.stdout.write(config.dumps(settings))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ggiwt", description="Extended-object trajectory PHD experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo experiment")
    run.add_argument("--scenario", type=int)
    run.add_argument("--filters", choices=config.FILTER_CHOICES)
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out")
    run.add_argument("--config")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config file and print the effective configuration")
    val.add_argument("path", nargs="?")
    val.add_argument("--config")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

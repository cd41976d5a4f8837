"""Command line entry point: ``levysv <kind> [--config FILE] [--seed S] [--workers W] [--out DIR]``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical abort.
"""

import argparse
import json
import logging
import sys
import time

from .errors import ConstraintError, DomainError, NumericalError
from .experiments import KINDS, WORKERS_ENV, ConfigError, ExperimentConfig, default_workers, emit_plotdata, run, save_report

log = logging.getLogger("levysv")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser():
    ap = argparse.ArgumentParser(prog="levysv", description="Heavy-tailed random matrix experiments.")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
        p.add_argument("--out", help="output directory for report.json, trials.csv and plot data")
        p.add_argument("--N", type=int)
        p.add_argument("--a", type=float)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override an experiment option (VALUE parsed as JSON when possible)")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args):
    base = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if base.get("kind", args.kind) != args.kind:
        raise ConfigError(f"config file is for {base['kind']!r}, not {args.kind!r}")
    base["kind"] = args.kind
    params = dict(base.get("params", {}))
    if args.N is not None:
        params["N"] = args.N
    if args.a is not None:
        params["a"] = args.a
    params.setdefault("N", 64)
    params.setdefault("a", 1.5)
    base["params"] = params
    opts = dict(base.get("options", {}))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        opts[k] = _parse_value(v)
    base["options"] = opts
    if args.seed is not None:
        base["seed"] = args.seed
    base.setdefault("seed", params.get("seed", 0))
    base["workers"] = args.workers if args.workers is not None else base.get("workers", default_workers())
    if args.out is not None:
        base["out"] = args.out
    return ExperimentConfig.from_dict(base)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, ConstraintError, DomainError, TypeError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    t0 = time.perf_counter()
    try:
        report = run(cfg)
    except (ConstraintError, DomainError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("%s finished in %.1f s (%d tasks, %d failed)", cfg.kind, time.perf_counter() - t0, report.tasks, report.failures)
    if cfg.out:
        save_report(report, cfg.out)
        emit_plotdata(report, cfg.out)
    json.dump(report.aggregates, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point.

    fedtrigger validate CONFIG
    fedtrigger run CONFIG [--output-dir DIR] [--workers N] [--no-plots]
    fedtrigger synth-data D L N SEPARATION SEED OUT.csv

Exit status: 0 success, 1 invalid config or arguments, 2 failure while running.
The ``FEDTRIGGER_OUTPUT_DIR`` environment variable overrides ``output_dir``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace

from . import config as fconfig
from . import runner
from .data import DataError, synthesize

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _cmd_validate(args) -> int:
    errors = fconfig.validate(args.config)
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def _cmd_run(args) -> int:
    try:
        cfg = fconfig.load_config(args.config)
    except fconfig.ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.workers:
        cfg = replace(cfg, attack=replace(cfg.attack, ga=replace(cfg.attack.ga, workers=args.workers)))
    if args.no_plots:
        cfg = replace(cfg, plots=False)
    try:
        out = args.output_dir
        result = runner.run(cfg, out)
    except Exception as exc:  # noqa: BLE001 - reported, mapped to exit status
        logging.getLogger(__name__).debug("run failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out_dir = out or cfg.resolved_output_dir()
    if cfg.scenario == "centralized":
        print(json.dumps(asdict(result), sort_keys=True))
    else:
        last = result.records[-1] if result.records else None
        print(json.dumps({"rounds": len(result.records),
                          "final": None if last is None else asdict(last)}, sort_keys=True))
    print(f"artifacts written to {out_dir}", file=sys.stderr)
    return EXIT_OK


def _cmd_synth(args) -> int:
    try:
        ds = synthesize(args.d, args.n_classes, args.n_per_class, args.separation, args.seed)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    ds.to_csv(args.out)
    print(f"wrote {len(ds)} records to {args.out}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedtrigger", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)

    r = sub.add_parser("run", help="run the experiment a config describes")
    r.add_argument("config")
    r.add_argument("--output-dir", help="artifact directory (overrides config and env)")
    r.add_argument("--workers", type=int, default=0,
                   help="threads for GA fitness evaluation; results do not depend on it")
    r.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("synth-data", help="write a synthetic Gaussian-cluster dataset as CSV")
    s.add_argument("d", type=int)
    s.add_argument("n_classes", type=int)
    s.add_argument("n_per_class", type=int)
    s.add_argument("separation", type=float)
    s.add_argument("seed", type=int)
    s.add_argument("out")
    s.set_defaults(func=_cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

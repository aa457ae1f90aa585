"""Command-line experiment runner.

    blab run <config.json> [--out DIR] [--Ns 4,8,16] [--seed K] [--plot]
    blab list-experiments

Exit status 0 when every pass boolean in the produced summaries is true.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments


def _parse_ns(text):
    if text is None:
        return None
    return [int(x) for x in text.replace(" ", "").split(",") if x]


def _parse_degrees(text):
    if text is None:
        return None
    return [int(x) for x in text.replace(" ", "").split(",") if x]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="blab",
        description="Matrix-quantization experiments on the sphere")
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run an experiment from a JSON config")
    runp.add_argument("config", help="path to the config JSON")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--Ns", default=None,
                      help="comma-separated ascending sizes, overrides config")
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--bundle.degrees", dest="bundle_degrees", default=None,
                      help="comma-separated summand degrees")
    runp.add_argument("--lmax2", type=int, default=None,
                      help="doubled basis cutoff override")
    runp.add_argument("--plot", action="store_true", default=None,
                      help="also write an SVG log-log plot")

    lst = sub.add_parser("list-experiments",
                         help="print experiment names, descriptions and "
                              "CSV columns")

    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        for name in sorted(experiments.EXPERIMENTS):
            entry = experiments.EXPERIMENTS[name]
            print(f"{name:22s} {entry['description']}")
            print(f"{'':22s} columns: {', '.join(entry['columns'])}")
        return 0

    overrides = {
        "out": args.out,
        "Ns": _parse_ns(args.Ns),
        "seed": args.seed,
        "lmax2": args.lmax2,
        "plot": args.plot,
        "bundle.degrees": _parse_degrees(args.bundle_degrees),
    }
    try:
        cfg = experiments.load_config(args.config, overrides)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = experiments.run(cfg)
    except Exception as exc:  # numerical-regime errors carry the N
        print(f"error running {cfg.experiment}: {exc}", file=sys.stderr)
        return 3
    status = "PASS" if summary["pass"] else "FAIL"
    print(f"{cfg.experiment}: {status} "
          f"({json.dumps(summary['details'], sort_keys=True, default=str)})")
    return 0 if summary["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())

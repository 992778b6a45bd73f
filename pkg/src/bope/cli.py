"""Command-line entry point: ``bope run``, ``bope oracle`` and ``bope report``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys

from .errors import BopeError, ConfigError, ParseError
from .harness.config import ExperimentConfig, ModelSpec, load_config
from .harness.experiment import format_report, run_experiment
from .synthetic import PRESETS, load_preset, true_value

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("bope")


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bope", description="Off-policy evaluation with classifier-based balancing weights.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment described by a config file")
    run.add_argument("--config", required=True, metavar="PATH")
    run.add_argument("--seed", type=_u64, help="override the config seed")
    run.add_argument("--out", metavar="PATH", help="report CSV path (overrides the config output)")
    run.add_argument("--threads", type=_positive, default=1, help="worker processes for replications")

    orc = sub.add_parser("oracle", help="run a shipped oracle preset, or print its true value")
    orc.add_argument("--preset", required=True, metavar="NAME", help=f"one of {', '.join(PRESETS)} or a preset JSON path")
    orc.add_argument("--n", type=_positive, default=2000, help="logged sample size per replication")
    orc.add_argument("--replications", type=_positive, default=100)
    orc.add_argument("--seed", type=_u64, default=0)
    orc.add_argument("--bope-model", default="gbt(rounds=auto)", metavar="SPEC")
    orc.add_argument("--estimators", default="dm, is, dr, switch, switch-dr")
    orc.add_argument("--out", metavar="PATH")
    orc.add_argument("--threads", type=_positive, default=1)
    orc.add_argument("--truth-only", action="store_true", help="print the exact policy value and exit")

    rep = sub.add_parser("report", help="pretty-print a report CSV")
    rep.add_argument("path", metavar="REPORT")
    return parser


def _print_rows(rows, out=None):
    out = out if out is not None else sys.stdout
    if not rows:
        return
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for j, r in enumerate(rows):
        cells = [c.ljust(w) if i < 3 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))]
        print("  ".join(cells).rstrip(), file=out)
        if j == 0:
            print("  ".join("-" * w for w in widths), file=out)


def _run(args):
    cfg = load_config(args.config, seed=args.seed)
    result = run_experiment(cfg, threads=args.threads, out=args.out)
    if not (args.out or cfg.output):
        sys.stdout.write(format_report(result.rows))
    for f in result.failures:
        print(f"warning: replication {f['replication']} {f['estimator']}/{f['weight_source']} "
              f"failed ({f['error']})", file=sys.stderr)
    return EXIT_OK


def _oracle(args):
    try:
        oracle = load_preset(args.preset)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load preset {args.preset!r}: {exc}") from None
    if args.truth_only:
        print(f"{oracle.name}\t{true_value(oracle).value:.6g}")
        return EXIT_OK
    cfg = ExperimentConfig(
        mode=oracle.kind, oracle=args.preset, n=args.n, replications=args.replications,
        seed=args.seed, bope_model=ModelSpec.parse(args.bope_model),
        estimators=tuple(e.strip() for e in args.estimators.split(",") if e.strip()),
    )
    result = run_experiment(cfg, threads=args.threads, out=args.out)
    if not args.out:
        sys.stdout.write(format_report(result.rows))
    return EXIT_OK


def _report(args):
    try:
        with open(args.path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ParseError(f"cannot read report {args.path}: {exc}") from None
    _print_rows(rows)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _run, "oracle": _oracle, "report": _report}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BopeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

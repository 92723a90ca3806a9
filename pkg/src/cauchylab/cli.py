"""Command-line entry point: ``cauchylab <verb> [--config FILE] [--out DIR] [--seed N]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments
from .reporting import VERB_TO_KIND, ConfigError, load_config

EXIT_FAIL = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cauchylab", description="Numerical experiments on Cauchy data spaces.")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")
    helps = {
        "verify": "run the acceptance suite",
        "sweep-1d": "continuity sweep of a 1D elliptic family",
        "disk-crossing": "Calderon projection through a Dirichlet eigenvalue on the disk",
        "subspace-lab": "randomized projector and subspace-family checks",
        "scale-lab": "randomized duality and interpolation checks",
    }
    for verb, text in helps.items():
        p = sub.add_parser(verb, help=text, description=text)
        p.add_argument("--config", type=Path, help="TOML config file (defaults apply when omitted)")
        p.add_argument("--out", type=Path, help="output directory (default: config 'out' or ./out/<verb>)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--log-scale", action="store_true", help="logarithmic y axis in plots")
        p.add_argument("--no-plot", action="store_true", help="skip SVG output")
        p.add_argument("-q", "--quiet", action="store_true", help="only print failures")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        config = load_config(args.config, VERB_TO_KIND[args.verb])
    except ConfigError as exc:
        print(f"cauchylab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        if args.seed < 0:
            print("cauchylab: --seed must be non-negative", file=sys.stderr)
            return EXIT_USAGE
        config.seed = args.seed
    out = args.out or (Path(config.out) if config.out else Path("out") / args.verb)
    try:
        report = experiments.run(config)
    except (ValueError, ArithmeticError) as exc:
        print(f"cauchylab: {args.verb}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    experiments.write_report(report, out, plots=not args.no_plot, log_scale=args.log_scale)
    for line in report.summary.get("lines", []):
        print(line)
    for a in report.assertions:
        if not a.passed or not args.quiet:
            status = "ok  " if a.passed else "FAIL"
            print(f"{status} {a.name}: {a.lhs:.6g} {a.relation} {a.rhs:.6g}")
    print(f"{args.verb}: {'PASS' if report.passed else 'FAIL'} (seed {config.seed}, {report.seconds:.2f}s, output in {out})")
    return 0 if report.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

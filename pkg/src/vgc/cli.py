"""``vgc`` command line: one experiment per invocation."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import VgcError
from .harness import EXPERIMENTS, METHODS, describe_defaults, load_config, run_experiment


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vgc",
        description="Variational Gaussian copula experiments.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=describe_defaults(),
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="{" + ",".join(EXPERIMENTS) + "}")
    for exp in EXPERIMENTS:
        p = sub.add_parser(
            exp,
            help=f"run the {exp} experiment",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog=describe_defaults(),
        )
        p.add_argument("--config", required=True, metavar="FILE", help="INI configuration file")
        p.add_argument("--seed", type=int, default=None, metavar="N", help="random seed (default: config or 0)")
        p.add_argument("--out", default=None, metavar="DIR", help="output directory (default: vgc-out/EXPERIMENT)")
        p.add_argument("--method", choices=METHODS[exp], default=None, metavar="M",
                       help=f"one of {', '.join(METHODS[exp])}")
        p.add_argument("--k", type=int, default=None, metavar="K", help="Bernstein degree (default: 10)")
        p.add_argument("--scheme", default=None, metavar="S",
                       help="entropy gradient scheme: stochastic or analytic (default: stochastic)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, args.experiment, args.method, args.seed, args.k, args.out, args.scheme)
    except (VgcError, ValueError) as exc:
        print(f"vgc: error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

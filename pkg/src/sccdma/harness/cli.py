"""Command-line interface.

Subcommands: de, threshold, ber, continuum, validate-llr.  Each reads an
optional flat config file, applies --set key=value overrides plus the
common flags, runs the experiment, and writes CSV + JSON (+ figures unless
--no-plot) into --out.

Exit codes: 0 success, 2 invalid configuration, 3 numerical
non-convergence in a required computation.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import InvalidConfig, MonostableRegime
from .io_utils import apply_overrides, load_config
from . import experiments

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_NOT_CONVERGED = 3


def _add_common(sub):
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--seed", type=int, help="base seed for all streams")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker processes for independent work items")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     dest="overrides", help="override a config key")
    sub.add_argument("--no-plot", action="store_true",
                     help="skip figure rendering")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sccdma",
        description="spatially coupled sparse-CDMA experiments")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
            ("de", "coupled density-evolution run, trajectory CSV"),
            ("threshold", "BP/IO/coupled threshold table"),
            ("ber", "Monte Carlo bit error rate"),
            ("continuum", "asymptotic efficiency sweep and profiles"),
            ("validate-llr", "empirical LLR statistics vs DE prediction")]:
        _add_common(subs.add_parser(name, help=helptext))
    return parser


def _gather_config(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    cfg = apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    if args.no_plot:
        cfg["plot"] = False
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _gather_config(args)
        threads = max(1, args.threads)
        if args.command == "de":
            outputs = experiments.run_de(cfg, args.out)
        elif args.command == "threshold":
            outputs = experiments.run_threshold(cfg, args.out, threads)
        elif args.command == "ber":
            outputs = experiments.run_ber(cfg, args.out, threads)
        elif args.command == "continuum":
            outputs = experiments.run_continuum(cfg, args.out, threads)
        elif args.command == "validate-llr":
            outputs = experiments.run_validate_llr(cfg, args.out, threads)
        else:  # pragma: no cover - argparse enforces the choices
            raise InvalidConfig(f"unknown command {args.command}")
    except (InvalidConfig, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except MonostableRegime as exc:
        print(f"not solvable at these parameters: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    for path in outputs:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Subcommands:
    pwgf run --config FILE
    pwgf verify
    pwgf classify --config FILE --ensemble CSV --eps E --delta D [--dump-spectrum CSV]
    pwgf defaults --constants FILE --eps E --delta D --eta H

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
``PWGF_THREADS`` caps worker parallelism for the run matrix.
"""

from __future__ import annotations

import argparse
import sys

from .driver import default_hyperparameters
from .errors import ConfigError, PWGFError
from .harness import _constants_from, classify_point, load_config, run_experiment, verify


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwgf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment matrix from a config file")
    p_run.add_argument("--config", required=True)

    sub.add_parser("verify", help="run the finite-difference and sampler oracle suite")

    p_cls = sub.add_parser("classify", help="classify an ensemble file as (eps, delta)-stationary/saddle")
    p_cls.add_argument("--config", required=True)
    p_cls.add_argument("--ensemble", required=True)
    p_cls.add_argument("--eps", type=float, required=True)
    p_cls.add_argument("--delta", type=float, required=True)
    p_cls.add_argument("--dump-spectrum", default=None)

    p_def = sub.add_parser("defaults", help="print hyperparameters resolved from smoothness constants")
    p_def.add_argument("--constants", required=True)
    p_def.add_argument("--eps", type=float, required=True)
    p_def.add_argument("--delta", type=float, required=True)
    p_def.add_argument("--eta", type=float, required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            for path in run_experiment(load_config(args.config)):
                print(path)
            return 0
        if args.command == "verify":
            return verify()
        if args.command == "classify":
            return classify_point(
                load_config(args.config), args.ensemble, args.eps, args.delta, args.dump_spectrum
            )
        if args.command == "defaults":
            consts = _constants_from(load_config(args.constants))
            cfg = default_hyperparameters(consts, eps=args.eps, delta=args.delta, eta=args.eta)
            print(f"pwgf.eta = {cfg.eta!r}")
            print(f"pwgf.eta_p = {cfg.eta_p!r}")
            print(f"pwgf.eps = {cfg.eps!r}")
            print(f"pwgf.delta = {cfg.delta!r}")
            print(f"pwgf.k_thres = {cfg.k_thres}")
            print(f"pwgf.f_thres = {cfg.f_thres!r}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PWGFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())

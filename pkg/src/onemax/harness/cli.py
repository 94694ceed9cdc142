"""Command-line entry point: one subcommand per experiment.

Exit codes: 0 success, 2 configuration error, 3 input-data error,
4 a verification run found a guarantee violated (results are still written).
"""

from __future__ import annotations

import argparse
import io
import sys
from typing import Optional, Sequence

from onemax.errors import ConfigError, DomainError, InputDataError
from onemax.harness.config import KINDS, build_config, read_config_file
from onemax.harness.experiments import run_experiment
from onemax.harness.records import emit_csv, write_records

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3, 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, help="price range upper bound (prices in [1, theta])")
    trust = p.add_mutually_exclusive_group()
    trust.add_argument("--lambda", dest="lambda_", type=float, metavar="LAMBDA",
                       help="trust level in [0, 1]; r = theta^-(1 - lambda/2)")
    trust.add_argument("--r", type=float, help="robustness target in [1/theta, theta^-1/2]")
    p.add_argument("--rho", type=float, action="append", help="interpolation level (repeatable)")
    p.add_argument("--n", type=int, help="length of worst-case instances")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials / repetitions / random cases")
    p.add_argument("--seed", type=int, help="64-bit unsigned seed")
    p.add_argument("--grid", type=int, help="number of points on the experiment's main grid")
    p.add_argument("--input", help="price CSV with header timestamp,price (real-data)")
    p.add_argument("--out", help="output CSV path (stdout when omitted)")
    p.add_argument("--config", help="key=value configuration file; flags override it")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any other configuration key, e.g. --set window=1000")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onemax", description="Threshold algorithms for one-max-search with predictions")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="EXPERIMENT")
    for kind in KINDS:
        _add_common(sub.add_parser(kind, help=f"run the {kind} experiment"))
    return parser


def _flag_values(args: argparse.Namespace) -> dict:
    values = {
        "theta": args.theta,
        "lambda": args.lambda_,
        "r": args.r,
        "rho": tuple(args.rho) if args.rho else None,
        "n": args.n,
        "trials": args.trials,
        "seed": args.seed,
        "grid": args.grid,
        "input": args.input,
        "out": args.out,
    }
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse reports bad usage with status 2, the config-error code
        return int(exc.code or 0)
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.kind, file_values, _flag_values(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run_experiment(cfg)
    except InputDataError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if cfg.out:
            emit_csv(result.records, cfg.out)
        else:
            buf = io.StringIO()
            write_records(result.records, buf)
            sys.stdout.write(buf.getvalue())
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    for message in result.violations:
        print(f"violation: {message}", file=sys.stderr)
    return EXIT_INVARIANT if result.violations else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

    duelay run   --config PATH [--out DIR] [--jobs N]
    duelay check --config PATH
    duelay demo  --setting {linear,quadratic,cubic} --out DIR
                 [--horizon N] [--num-seeds N] [--jobs N]

Exit codes: 0 success, 1 configuration error, 2 runtime error.  The optional
environment variable DUELAY_SEED_OFFSET (integer, default 0) is added to
every seed of a suite.
"""

from __future__ import annotations

import argparse
import os
import sys

from .harness import ConfigError, ExperimentConfig, demo_config, demo_toml, run_suite


class _Parser(argparse.ArgumentParser):
    # Usage problems are configuration errors: exit 1, not argparse's 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="duelay", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run the suite described by a config file")
    p_run.add_argument("--config", required=True, help="TOML experiment config")
    p_run.add_argument("--out", default=None, help="output directory (default: ./results)")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p_check = sub.add_parser("check", help="validate a config and print resolved values")
    p_check.add_argument("--config", required=True)

    p_demo = sub.add_parser("demo", help="run a built-in synthetic comparison")
    p_demo.add_argument("--setting", required=True, choices=["linear", "quadratic", "cubic"])
    p_demo.add_argument("--out", required=True)
    p_demo.add_argument("--horizon", type=int, default=None, help="override the demo horizon")
    p_demo.add_argument("--num-seeds", type=int, default=None, help="override the seed count")
    p_demo.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "check":
            config = ExperimentConfig.from_toml(args.config)
            rho = config.delay_model().rho
            cond = config.kappa_mu * config.feature_bound**2
            print(f"config ok: algo={config.algo} env={config.env_kind} T={config.horizon}")
            print(f"resolved rho = {rho:.6g}")
            print(f"resolved kappa_mu = {config.kappa_mu:.6g}")
            print(f"ridge condition: lambda = {config.lam:.6g} > kappa_mu * L^2 = {cond:.6g}")
            return 0
        if args.command == "run":
            config = ExperimentConfig.from_toml(args.config)
            out = args.out or os.path.join(os.getcwd(), "results")
            run_suite(config, out_dir=out, jobs=args.jobs)
            print(f"wrote {os.path.join(out, 'traces.csv')} and summary.json")
            return 0
        if args.command == "demo":
            config = demo_config(args.setting, horizon=args.horizon, num_seeds=args.num_seeds)
            os.makedirs(args.out, exist_ok=True)
            cfg_path = os.path.join(args.out, f"demo_{args.setting}.toml")
            with open(cfg_path, "w", newline="\n") as fh:
                fh.write(demo_toml(config))
            run_suite(config, out_dir=args.out, jobs=args.jobs)
            print(f"wrote {cfg_path}, traces.csv and summary.json under {args.out}")
            return 0
        parser.error(f"unknown command {args.command!r}")
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

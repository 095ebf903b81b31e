"""Command-line front-end for the Monte-Carlo experiments."""
from __future__ import annotations

import argparse
import math
import sys

from .channel import SimConfig, load_config
from .harness import ALGORITHMS, ExperimentSpec, render, run_experiment, summarize

_UTILITY = {"rate": "rate", "pf": "pf", "ee": "ee"}


def ring_positions(n: int, radius: float = 0.25 * math.sqrt(2)) -> tuple:
    """n BSs evenly spaced on a circle; n=4 gives (+-0.25, +-0.25)."""
    return tuple(
        (round(radius * math.cos(math.pi / 4 + 2 * math.pi * k / n), 12),
         round(radius * math.sin(math.pi / 4 + 2 * math.pi * k / n), 12))
        for k in range(n))


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="d2d-assign",
        description="Mode selection and BS association under load constraints: "
                    "Monte-Carlo comparison of matching, price-based and baseline algorithms.")
    p.add_argument("--config", help="JSON or TOML file with SimConfig fields")
    p.add_argument("--users", type=int, help="number of users M")
    p.add_argument("--bs", type=int, help="number of base stations N")
    p.add_argument("--load", type=int, default=10, help="per-BS capacity b (default 10)")
    p.add_argument("--power-db", type=float, help="per-user transmit power in dB")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int)
    p.add_argument("--utility", choices=sorted(_UTILITY), default="rate")
    p.add_argument("--algorithms", type=_csv_list(str), default=["mwbm", "dual"],
                   help=f"comma list from {','.join(ALGORITHMS)}")
    p.add_argument("--sweep", choices=["load", "power"], default="load")
    p.add_argument("--sweep-values", type=_csv_list(float),
                   help="comma list; defaults to the single --load or --power-db value")
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.add_argument("--format", choices=["csv", "json", "table"], default="csv")
    p.add_argument("--no-timing", action="store_true",
                   help="leave ms_per_trial empty so repeated runs give identical files")
    return p


def spec_from_args(args) -> ExperimentSpec:
    cfg = load_config(args.config) if args.config else SimConfig()
    changes = {}
    if args.users is not None:
        changes["num_users"] = args.users
    if args.bs is not None and args.bs != cfg.num_bs:
        changes["num_bs"] = args.bs
        changes["bs_positions"] = ring_positions(args.bs)
    if args.power_db is not None:
        changes["tx_power_db"] = args.power_db
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        cfg = cfg.with_(**changes)

    values = args.sweep_values
    if values is None:
        values = [args.load] if args.sweep == "load" else [cfg.tx_power_db]
    if args.sweep == "load":
        if any(v != int(v) for v in values):
            raise ValueError("load sweep values must be integers")
        values = [int(v) for v in values]
    return ExperimentSpec(
        config=cfg, algorithms=tuple(args.algorithms), utility=_UTILITY[args.utility],
        sweep=args.sweep, sweep_values=tuple(values), trials=args.trials, load=args.load,
        out=args.out, fmt=args.format, timing=not args.no_timing)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
        rows = run_experiment(spec)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"d2d-assign: error: {exc}", file=sys.stderr)
        return 1
    if spec.out:
        sys.stdout.write(summarize(rows))
    else:
        sys.stdout.write(render(rows, spec.fmt, spec))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end.

One subcommand per experiment.  Settings resolve in order: built-in
defaults, the experiment's baseline, --config file, then explicit flags
and --set pairs.  Exit codes: 0 success, 2 bad configuration, 3 budget or
enumeration guard, 4 acceptance floor (too few accepted replicas within
the attempt allowance).
"""

from __future__ import annotations

import argparse
import sys

from ..errors import (
    AcceptanceFloor,
    BudgetExceeded,
    ConfigError,
    EnumerationTooLarge,
)
from .config import EXPERIMENTS, build_config, parse_config_text
from .experiments import DRIVERS
from .records import write_plots, write_record, write_tables


def _parser():
    parser = argparse.ArgumentParser(
        prog="gwskel",
        description="Monte Carlo and exact checks for critical branching "
                    "random walk skeletons.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--replicas", type=int,
                       help="replica count (attempts or accepted target, "
                            "depending on the experiment)")
        p.add_argument("--law", help="offspring law name")
        p.add_argument("--threads", type=int, help="worker threads")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"),
                       help="table format")
        p.add_argument("--plot", action="store_true", default=None,
                       help="also write an SVG per statistic")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override any config key (repeatable)")
    return parser


def _overrides(args):
    values = {}
    lines = []
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        lines.append(item.replace("=", " = ", 1))
    values.update(parse_config_text("\n".join(lines)))
    for key in ("seed", "replicas", "law", "threads", "out", "format"):
        val = getattr(args, key)
        if val is not None:
            values[key] = val
    if args.plot:
        values["plot"] = True
    return values


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args.experiment, args.config, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        record = DRIVERS[cfg.experiment](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BudgetExceeded, EnumerationTooLarge) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except AcceptanceFloor as exc:
        print(f"acceptance floor: {exc}", file=sys.stderr)
        return 4
    path = write_record(record, cfg.out)
    tables = write_tables(record, cfg.out, cfg.format)
    plots = write_plots(record, cfg.out) if cfg.plot else []
    print(f"experiment: {cfg.experiment}")
    print(f"record:     {path}")
    for t in tables:
        print(f"table:      {t}")
    for t in plots:
        print(f"plot:       {t}")
    print(f"seconds:    {record.meta.get('seconds', 0.0):.2f}")
    print(f"content:    sha256:{record.content_hash()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

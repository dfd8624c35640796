"""Argument parsing and exit-code mapping for the rdpgrid command."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..errors import ConfigError, RdpgridError, ResourceLimit, UnknownPreset
from .config import apply_overrides, load_config, parse_config
from .presets import PRESET_NAMES, preset_text
from .report import emit_dot, run_experiment

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdpgrid",
        description="Run grid-world decision-process experiments from "
                    "declarative configs.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a config and write artifacts")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, default=Path("."),
                     help="output directory (default: current directory)")
    run.add_argument("--seed", type=int, default=None,
                     help="override the config's master seed")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE",
                     help="override a config entry by dotted key")

    pre = sub.add_parser("preset", help="write or print a bundled config")
    pre.add_argument("name", choices=PRESET_NAMES)
    pre.add_argument("--size", type=int, default=None,
                     help="grid size for the exp1 family (3 to 7)")
    pre.add_argument("--out", type=Path, default=None,
                     help="directory to write <name>.toml into "
                          "(default: print to stdout)")

    dot = sub.add_parser("dot", help="render automata and product to DOT")
    dot.add_argument("config", type=Path)
    dot.add_argument("--out", type=Path, required=True)
    return parser


def _cmd_run(args) -> int:
    raw = apply_overrides(load_config(args.config), args.overrides)
    cfg = parse_config(raw)
    summary = run_experiment(cfg, args.out, seed=args.seed)
    print(f"wrote {args.out / 'episodes.csv'} and "
          f"{args.out / 'summary.json'}")
    relfreq = summary["relfreq_within_10pct"]
    print(f"extended MDP size {summary['extended_mdp_size']}, "
          f"unsafe visits {summary['unsafe_visits']}"
          + (f", within-10% rel. freq. {relfreq:.2f}"
             if relfreq is not None else ""))
    return 0


def _cmd_preset(args) -> int:
    text = preset_text(args.name, args.size)
    if args.out is None:
        print(text, end="")
        return 0
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{args.name}.toml"
    path.write_text(text)
    print(f"wrote {path}")
    return 0


def _cmd_dot(args) -> int:
    cfg = parse_config(load_config(args.config))
    for path in emit_dot(cfg, args.out):
        print(f"wrote {path}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "preset": _cmd_preset, "dot": _cmd_dot}
    try:
        return handler[args.command](args)
    except (ConfigError, UnknownPreset) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except RdpgridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

    spinfork run <config> [--set key=value ...] [--outdir DIR]
                 [--demag fft|local] [--snapshots t1,t2,...]

Exit status is 0 when every scenario check passed, 2 otherwise.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config_with_overrides


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spinfork",
        description="Spin-wave majority gate micromagnetic simulator")
    sub = p.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a scenario from a config file")
    runp.add_argument("config", help="path to the config file")
    runp.add_argument("--set", dest="sets", action="append", default=[],
                      metavar="KEY=VALUE", help="override a config key")
    runp.add_argument("--outdir", help="output directory override")
    runp.add_argument("--demag", choices=("fft", "local", "none"),
                      help="demagnetization mode override")
    runp.add_argument("--snapshots", help="comma-separated snapshot times (s)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command != "run":
        return 2
    try:
        with open(args.config, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return 2

    sets = list(args.sets)
    if args.demag:
        sets.append(f"demag.mode={args.demag}")
    if args.snapshots:
        sets.append(f"snapshots={args.snapshots}")
    if args.outdir:
        sets.append(f"output.dir={args.outdir}")
    try:
        cfg = parse_config_with_overrides(text, sets)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    from .runner import run_scenario
    summary = run_scenario(cfg)
    for name, ok in sorted(summary["checks"].items()):
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    for flag in summary["flags"]:
        print(f"[flag] {flag}")
    print(f"summary: {summary['scenario']} -> "
          f"{'PASS' if summary['passed'] else 'FAIL'}")
    return 0 if summary["passed"] else 2


if __name__ == "__main__":
    sys.exit(main())

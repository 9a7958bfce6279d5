"""Entry point: ``shadownet <command> [--config f.json] [--seed N] [--threads N] [--check] [--out dir]``.

Exit codes: 0 success, 1 runtime error, 2 configuration error, and under
--check 10 + n for the lowest-numbered failed acceptance criterion n.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from ..errors import ConfigError
from .commands import run_command
from .config import COMMANDS, parse_config, parse_overrides
from .report import write_report

log = logging.getLogger("shadownet")

EXIT_RUNTIME = 1
EXIT_CONFIG = 2
CHECK_EXIT_BASE = 10


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shadownet", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--check", action="store_true", default=None,
                    help="exit nonzero when an acceptance threshold is missed")
    ap.add_argument("--out", dest="output_dir")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a command parameter (value parsed as JSON when possible)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _file_command(text):
    try:
        doc = json.loads(text) if text else None
    except json.JSONDecodeError:
        return None  # reported by parse_config
    return doc.get("command") if isinstance(doc, dict) else None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        text = open(args.config).read() if args.config else None
        file_command = _file_command(text)
        if file_command is not None and file_command != args.command:
            raise ConfigError("command", f"config says {file_command!r} but {args.command!r} was requested")
        threads = args.threads
        if threads is None and os.environ.get("SHADOWNET_THREADS"):
            threads = int(os.environ["SHADOWNET_THREADS"])
        overrides = {"command": args.command, "seed": args.seed, "threads": threads, "check": args.check,
                     "output_dir": args.output_dir, "parameters": parse_overrides(args.set)}
        cfg = parse_config(text, overrides)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_command(cfg)
        paths = write_report(report, cfg.output_dir)
    except Exception as exc:  # surfaced as a one-line message
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        log.info("wrote %s", p)
    for crit, ok in sorted(report.checks.items()):
        print(f"criterion {crit}: {'PASS' if ok else 'FAIL'}")
    if cfg.check:
        failed = [c for c, ok in sorted(report.checks.items()) if not ok]
        if failed:
            return CHECK_EXIT_BASE + failed[0]
    return 0


if __name__ == "__main__":
    sys.exit(main())

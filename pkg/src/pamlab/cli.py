"""Command line entry point: ``pamlab <kind> [config] [--set key=value ...] --out DIR``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .experiments import KINDS, ConfigError, parse_config, run

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3


def _overrides(pairs: List[str]) -> dict:
    out = {}
    for p in pairs:
        if "=" not in p:
            raise ConfigError([f"--set {p!r}: expected key=value"])
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pamlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override or add a config entry")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")

    common(sub.add_parser("run", help="run the experiment named by 'kind' in the config"))
    for kind in KINDS:
        common(sub.add_parser(kind, help=f"run a {kind} experiment"))
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text() if args.config else ""
        over = _overrides(args.set)
        if args.command != "run":
            over["kind"] = args.command
        base = Path(args.config).parent if args.config else None
        cfg = parse_config(text, over, base_dir=base)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    res = run(cfg, args.out, threads=args.threads)
    print(res.result_path)
    if res.status:
        print("some sweep points failed; see the error column", file=sys.stderr)
    return res.status


if __name__ == "__main__":
    sys.exit(main())

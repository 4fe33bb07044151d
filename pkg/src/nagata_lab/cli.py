"""``nagata-lab run --config <path> [--out <dir>] [--seed <int>]`` and ``nagata-lab summarize <dir>...``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import NagataLabError
from .harness import EXIT_USAGE, emit_summary, load_reports, parse_config, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nagata-lab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None)
    r.add_argument("--seed", type=int, default=None)
    s = sub.add_parser("summarize", help="tabulate report.json files")
    s.add_argument("dirs", nargs="+")
    s.add_argument("--json", action="store_true", help="print the JSON summary instead of the table")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    try:
        if args.command == "run":
            with open(args.config) as fh:
                cfg = parse_config(fh.read())
            if args.seed is not None:
                cfg.seed = args.seed
            report = run(cfg, args.out)
            text, _, code = emit_summary([report])
            print(text)
            for c in report.criteria:
                print(f"{'PASS' if c.passed else 'FAIL'} {c.name} {c.detail}".rstrip())
            if report.error:
                print(report.error, file=sys.stderr)
            return code
        reports = load_reports(args.dirs)
        text, summary, code = emit_summary(reports)
        print(json.dumps(summary, indent=2, sort_keys=True) if args.json else text)
        return code
    except (OSError, NagataLabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

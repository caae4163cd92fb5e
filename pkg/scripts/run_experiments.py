#!/usr/bin/env python3
"""Run every scenario with its default configuration.

Artifacts land in ``runs/<name>/`` (override with ``--out-root``); each run
leaves the usual ``trace.csv`` / ``theory.csv`` / ``summary.json`` trio,
ready for ``plot_results.py``.
"""

import argparse
import json
import sys
from pathlib import Path

from splineflow import cli

# (directory name, CLI argv); stability runs both variants
EXPERIMENTS = [
    ("atoms", ["atoms"]),
    ("stability-unstable", ["stability", "--case", "unstable"]),
    ("stability-stable", ["stability", "--case", "stable"]),
    ("small-c", ["small-c"]),
    ("linearized", ["linearized"]),
    ("gaussian", ["gaussian"]),
    ("stationary", ["stationary"]),
    ("spectral-table", ["spectral-table"]),
    ("verify", ["verify"]),
]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-root", default="runs", help="artifact root")
    parser.add_argument("--only", nargs="*", default=None,
                        help="subset of experiment names to run")
    args = parser.parse_args(argv)

    selected = EXPERIMENTS
    if args.only:
        known = {name for name, _ in EXPERIMENTS}
        unknown = set(args.only) - known
        if unknown:
            print(f"unknown experiments: {sorted(unknown)}", file=sys.stderr)
            return 2
        selected = [(n, a) for n, a in EXPERIMENTS if n in args.only]

    worst = 0
    for name, argv_run in selected:
        out = Path(args.out_root) / name
        code = cli.main(argv_run + ["--out-dir", str(out)])
        summary = {}
        summary_path = out / "summary.json"
        if summary_path.exists():
            summary = json.loads(summary_path.read_text())
        wall = summary.get("wall_time_s", float("nan"))
        print(f"{name:<20} exit {code}  {wall:6.2f} s  -> {out}")
        for key, value in sorted(summary.get("error_metrics", {}).items()):
            print(f"    {key}: {value}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())

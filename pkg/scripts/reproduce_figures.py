#!/usr/bin/env python3
"""Reproduce the headline experiment outputs for the shipped configs.

For each config this runs the fixed-epsilon solve, the explicit limit
construction, the solve-vs-limit comparison, and the interface
diagnostics, writing plot-ready CSV files under out/<name>/.
"""

import argparse
import sys
from pathlib import Path

from seglimit import cli

CONFIGS = ["line_m2", "line_m3", "disk_m3", "square_m4", "square_m4_overlap"]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--configs-dir", default=str(Path(__file__).resolve().parents[1] / "configs"))
    parser.add_argument("--out", default="out")
    parser.add_argument("--only", nargs="*", choices=CONFIGS, default=None)
    args = parser.parse_args()

    names = args.only or CONFIGS
    worst = 0
    for name in names:
        cfg_path = str(Path(args.configs_dir) / f"{name}.cfg")
        for sub in ("validate", "compare", "interfaces"):
            out_dir = str(Path(args.out) / name / sub)
            code = cli.main([sub, cfg_path, "--out", out_dir])
            print(f"{name}/{sub}: exit {code}")
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())

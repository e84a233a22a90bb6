"""Regenerate every reference artifact through the CLI's ``reproduce`` command.

``hist15`` runs the optimizer on 100 fifteen-step targets and takes about a
quarter of an hour on one core; pass ``--skip-slow`` to leave it out.
"""
from __future__ import annotations

import argparse
import sys

from qwalk.cli import REPRODUCE_CASES, main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="artifacts")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-slow", action="store_true")
    args = ap.parse_args()
    worst = 0
    for case in REPRODUCE_CASES:
        if args.skip_slow and case == "hist15":
            continue
        code = cli_main(["reproduce", "--case", case, "--out-dir", args.out_dir, "--seed", str(args.seed)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())

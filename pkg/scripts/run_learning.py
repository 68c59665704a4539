#!/usr/bin/env python3
"""Headline learning comparison: classical vs quantum phase settings.

Runs 200 trials per machine setting at the frozen (W, C_r) cell and reports
fitted completion centers plus bootstrap speed-up intervals.  Thin wrapper
over ``usfc learn``; every artifact lands in --out.
"""
import argparse
import sys

from usfc.cli import main


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--out", default="results/learn")
    parser.add_argument(
        "--settings",
        default="classical,delta0,half-pi,ti",
        help="comma-separated machine settings",
    )
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    sys.exit(
        main(
            [
                "learn",
                "--seed", str(args.seed),
                "--trials", str(args.trials),
                "--settings", args.settings,
                "--out", args.out,
            ]
        )
    )

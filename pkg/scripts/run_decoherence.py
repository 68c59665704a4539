#!/usr/bin/env python3
"""Dephasing scan: quantum learning speed across gamma with classical baseline.

100 trials per rate on the default 5-point grid reproduces the slowdown
curve; gamma = 1 collapses onto the classical machine.  Thin wrapper over
``usfc decohere``.
"""
import argparse
import sys

from usfc.cli import main


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--out", default="results/decohere")
    parser.add_argument("--gammas", default="0,0.25,0.5,0.75,1")
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    sys.exit(
        main(
            [
                "decohere",
                "--seed", str(args.seed),
                "--trials", str(args.trials),
                "--gammas", args.gammas,
                "--out", args.out,
            ]
        )
    )

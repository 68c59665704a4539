#!/usr/bin/env python3
"""Train memory banks for N-bit Boolean targets.

By default trains all sixteen two-bit functions on both machines and prints
a per-function iteration-count comparison; --function trains a single code
through the CLI so the bank, report and summary land in --out.
"""
import argparse
import sys

from usfc.cli import main as cli_main
from usfc.learner import DEConfig
from usfc.model import Machine, PhaseConfig
from usfc.nbit import NBitTrainingSet, assembled_fidelity, train_all
from usfc.tuning import TUNED_CR, TUNED_W


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-bits", type=int, default=2)
    parser.add_argument("--function", type=int, default=None,
                        help="single truth-table code; omit to run all codes")
    parser.add_argument("--machine", choices=["classical", "quantum"],
                        default="quantum")
    parser.add_argument("--out", default="results/nbit")
    return parser.parse_args()


def bank_config(machine: Machine) -> DEConfig:
    return DEConfig(m=10, w=TUNED_W, cr=TUNED_CR, epsilon_t=0.005,
                    machine=machine, phases=PhaseConfig.zero())


def run_all(n_bits: int, seed: int) -> int:
    print("code  classical-iters  quantum-iters  F_C      F_Q")
    for code in range(2 ** (2**n_bits)):
        targets = NBitTrainingSet.from_function(
            n_bits, lambda x, code=code: (code >> int(x, 2)) & 1)
        row, fids = [f"{code:4d}"], []
        for machine in (Machine.CLASSICAL, Machine.QUANTUM):
            result = train_all(targets, bank_config(machine), seed)
            if result.bank.partial:
                print(f"{code:4d}  FAILED on {machine.value}: "
                      f"{sorted(result.bank.failed_blocks)}")
                return 1
            row.append(f"{result.total_iterations:15d}")
            fids.append(assembled_fidelity(result.bank, targets, machine))
        print("  ".join(row) + "  " + "  ".join(f"{f:.5f}" for f in fids))
    return 0


def main() -> int:
    args = parse_args()
    if args.function is None:
        return run_all(args.n_bits, args.seed)
    return cli_main([
        "nbit",
        "--seed", str(args.seed),
        "--n-bits", str(args.n_bits),
        "--function", str(args.function),
        "--machine", args.machine,
        "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())

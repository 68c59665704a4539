"""Primitive N-bit classification strategy built from single-feature circuits.

An N-bit input x = x_N ... x_1 is split into a block index j = x_N ... x_2 and
the feature bit x_1.  One memory block R_j holds a trained preference vector
per index, 2^(N-1) blocks in total.  Training block j is single-bit learning:
the working channel enters in alpha and must output tau, where

    alpha = 0 if j = 0...0, else the target of block j-1 at the same x_1,
    tau   = the target T at input (j, x_1).

(The "previous block" is the integer decrement of j; for N = 2 this is the
printed rule alpha = T_{0 x1} for j = 1.)  A block asked to start from
alpha = 1 is trained on the bit-flipped target table instead of a physically
flipped preparation; conjugating both working rails by a flip maps one gate
set onto an equally preferring one with the same relative phase, so the two
formulations have identical fidelities (the tests check this directly).

The assembled circuit chains blocks 0..j in index order on the working bit,
measuring between blocks, so each link is the column-stochastic transition
matrix B[y, a] = Pr(y | feature x_1, working input a) of one trained block.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .experiments import batch_label
from .fidelity import TaskSpec, task_fidelity
from .learner import DEConfig, TrialRecord, run_trial
from .model import Machine, PhaseConfig, PreferenceVector, output_distribution
from .rng import batch_seed

__all__ = [
    "NBitTrainingSet",
    "BlockParameters",
    "MemoryBank",
    "NBitTrainingResult",
    "route",
    "working_io",
    "block_task",
    "train_all",
    "evaluate_circuit",
    "assembled_fidelity",
]


def _check_bits(value: str, length: int, what: str) -> str:
    if len(value) != length or set(value) - {"0", "1"}:
        raise ValueError(f"{what} must be a {length}-bit string, got {value!r}")
    return value


@dataclass(frozen=True)
class NBitTrainingSet:
    """Complete truth table x -> T_x over {0,1}^n_bits."""

    n_bits: int
    targets: Mapping[str, int]

    def __post_init__(self) -> None:
        n = int(self.n_bits)
        if n < 1:
            raise ValueError(f"n_bits must be positive, got {self.n_bits}")
        object.__setattr__(self, "n_bits", n)
        if len(self.targets) != 2**n:
            raise ValueError(f"training set must cover all {2**n} inputs, got {len(self.targets)}")
        clean = {}
        for x, t in self.targets.items():
            _check_bits(x, n, "training input")
            if t not in (0, 1):
                raise ValueError(f"target for {x!r} must be 0 or 1, got {t}")
            clean[x] = int(t)
        object.__setattr__(self, "targets", clean)

    @classmethod
    def from_function(cls, n_bits: int, fn: Callable[[str], int]) -> "NBitTrainingSet":
        inputs = [format(k, f"0{n_bits}b") for k in range(2**n_bits)]
        return cls(n_bits=n_bits, targets={x: int(fn(x)) for x in inputs})

    def task_spec(self) -> TaskSpec:
        rows = {x: ((1.0, 0.0) if t == 0 else (0.0, 1.0)) for x, t in self.targets.items()}
        return TaskSpec(n_bits=self.n_bits, table=rows)


@dataclass(frozen=True)
class BlockParameters:
    """Trained preferences and realized relative phase of one memory block."""

    pref: PreferenceVector
    delta: float

    def to_dict(self) -> dict:
        return {"p0": self.pref.p0, "p1": self.pref.p1, "delta": float(self.delta)}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "BlockParameters":
        return cls(pref=PreferenceVector(payload["p0"], payload["p1"]), delta=float(payload["delta"]))


@dataclass(frozen=True)
class MemoryBank:
    """2^(N-1) trained blocks, keyed by the (N-1)-bit index (\"\" for N=1)."""

    n_bits: int
    blocks: Mapping[str, BlockParameters]
    failed_blocks: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = int(self.n_bits)
        if n < 1:
            raise ValueError(f"n_bits must be positive, got {self.n_bits}")
        object.__setattr__(self, "n_bits", n)
        expected = {format(k, f"0{n - 1}b") if n > 1 else "" for k in range(2 ** (n - 1))}
        if set(self.blocks) != expected:
            raise ValueError(f"memory bank must hold exactly the {2 ** (n - 1)} block indices of width {n - 1}")
        object.__setattr__(self, "blocks", dict(self.blocks))
        object.__setattr__(self, "failed_blocks", tuple(self.failed_blocks))

    @property
    def partial(self) -> bool:
        return bool(self.failed_blocks)

    def to_json(self) -> str:
        if self.partial:
            raise ValueError(f"refusing to serialize a partial bank; failed blocks: {list(self.failed_blocks)}")
        return json.dumps(
            {"n_bits": self.n_bits, "blocks": {j: p.to_dict() for j, p in sorted(self.blocks.items())}},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "MemoryBank":
        payload = json.loads(text)
        blocks = {j: BlockParameters.from_dict(entry) for j, entry in payload["blocks"].items()}
        return cls(n_bits=payload["n_bits"], blocks=blocks)


def route(x: str) -> tuple[str, int]:
    """Split an input string x_N...x_1 into (block index x_N...x_2, feature x_1)."""
    if not x:
        raise ValueError("input string must have at least one bit")
    _check_bits(x, len(x), "input")
    return x[:-1], int(x[-1])


def _previous_index(j: str) -> str:
    return format(int(j, 2) - 1, f"0{len(j)}b")


def working_io(j: str, x1: int, targets: NBitTrainingSet) -> tuple[int, int]:
    """Working-channel input alpha and measurement target tau for block j."""
    if x1 not in (0, 1):
        raise ValueError(f"feature bit must be 0 or 1, got {x1}")
    if len(j) != targets.n_bits - 1:
        raise ValueError(f"block index {j!r} does not match n_bits={targets.n_bits}")
    tau = targets.targets[j + str(x1)]
    if j == "" or int(j, 2) == 0:
        alpha = 0
    else:
        alpha = targets.targets[_previous_index(j) + str(x1)]
    return alpha, tau


def block_task(j: str, targets: NBitTrainingSet) -> TaskSpec:
    """Single-bit task table for block j on a standard (alpha = 0) circuit.

    Rows where the block starts from alpha = 1 appear bit-flipped here.
    """
    rows = {}
    for x1 in (0, 1):
        alpha, tau = working_io(j, x1, targets)
        effective = tau ^ alpha
        rows[str(x1)] = (1.0, 0.0) if effective == 0 else (0.0, 1.0)
    return TaskSpec(n_bits=1, table=rows)


@dataclass(frozen=True)
class NBitTrainingResult:
    bank: MemoryBank
    records: Mapping[str, TrialRecord]
    total_iterations: int


def train_all(targets: NBitTrainingSet, config: DEConfig, master_seed: int) -> NBitTrainingResult:
    """Train every memory block on its single-bit task, ascending index order."""
    n = targets.n_bits
    indices = [format(k, f"0{n - 1}b") if n > 1 else "" for k in range(2 ** (n - 1))]
    blocks: dict[str, BlockParameters] = {}
    records: dict[str, TrialRecord] = {}
    failed: list[str] = []
    for j in indices:
        task = block_task(j, targets)
        label = f"nbit|block={j}|{batch_label(config.machine, config.phases, config.gamma, task)}"
        record = run_trial(config, task, batch_seed(master_seed, label))
        records[j] = record
        pref = PreferenceVector(*record.best_pref)
        blocks[j] = BlockParameters(pref=pref, delta=config.phases.delta(pref))
        if not record.converged:
            failed.append(j)
    bank = MemoryBank(n_bits=n, blocks=blocks, failed_blocks=tuple(failed))
    return NBitTrainingResult(
        bank=bank,
        records=records,
        total_iterations=sum(r.iterations_run for r in records.values()),
    )


def _block_transition(
    params: BlockParameters, machine: Machine, gamma: float, x1: int
) -> np.ndarray:
    """Column-stochastic B[y, a] = Pr(y | feature x1, working input a)."""
    phases = PhaseConfig.from_delta(params.delta)
    columns = [
        output_distribution(machine, params.pref, phases, gamma, x1, working_input=a) for a in (0, 1)
    ]
    return np.column_stack(columns)


def evaluate_circuit(bank: MemoryBank, x: str, machine: Machine, gamma: float = 0.0) -> np.ndarray:
    """Output distribution Pr(y|x) of the assembled circuit."""
    if bank.partial:
        raise ValueError(f"bank is partially trained; failed blocks: {list(bank.failed_blocks)}")
    j, x1 = route(x)
    if len(x) != bank.n_bits:
        raise ValueError(f"input {x!r} does not match bank width {bank.n_bits}")
    j_int = int(j, 2) if j else 0
    state = np.array([1.0, 0.0])
    for k in range(j_int + 1):
        key = format(k, f"0{bank.n_bits - 1}b") if bank.n_bits > 1 else ""
        state = _block_transition(bank.blocks[key], machine, gamma, x1) @ state
    return state


def assembled_fidelity(
    bank: MemoryBank, targets: NBitTrainingSet, machine: Machine, gamma: float = 0.0
) -> float:
    """Task fidelity of the assembled circuit against the full truth table."""
    dist = {x: evaluate_circuit(bank, x, machine, gamma) for x in targets.targets}
    return task_fidelity(dist, targets.task_spec())

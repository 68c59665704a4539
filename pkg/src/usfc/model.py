"""Exact model of the universal single-feature circuit (USFC).

A USFC routes one classical input bit x through an unconditional gate g0 and an
x-conditioned gate g1 acting on a one-bit working channel.  Each gate acts as
identity with its gate-adopting preference p_k = Pr(g_k -> identity) and as
logical-not otherwise.  The classical machine realizes the gates as stochastic
maps on a probability 2-vector; the quantum machine realizes them as unitaries
on a qubit, with per-gate phases that interfere.  Dephasing between the gates
multiplies the density-matrix off-diagonals by (1 - gamma); at gamma = 1 the
quantum machine reproduces the classical one exactly.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Machine",
    "GateKind",
    "PhaseMode",
    "PreferenceVector",
    "PhaseConfig",
    "GateMatrix",
    "WorkingState",
    "canonical_delta",
    "build_classical_gate",
    "build_quantum_gate",
    "evolve",
    "dephase",
    "measure",
    "output_distribution",
]


class Machine(str, Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"


class GateKind(str, Enum):
    STOCHASTIC = "stochastic"
    UNITARY = "unitary"


class PhaseMode(str, Enum):
    FIXED = "fixed"
    TARGET_INDEPENDENT = "target-independent"


def _check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def canonical_delta(raw: float) -> float:
    """Reduce a phase difference to its canonical magnitude in [0, pi]."""
    wrapped = math.remainder(float(raw), 2.0 * math.pi)  # (-pi, pi]
    return abs(wrapped)


def _fold_unit(value: float) -> float:
    """Triangle-wave fold of a real number into [0, 1] (period 2, reflecting)."""
    folded = math.fmod(abs(float(value)), 2.0)
    return 2.0 - folded if folded > 1.0 else folded


@dataclass(frozen=True)
class PreferenceVector:
    """Gate-adopting preference pair (p0, p1), p_k = Pr(g_k -> identity)."""

    p0: float
    p1: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "p0", _check_probability(self.p0, "p0"))
        object.__setattr__(self, "p1", _check_probability(self.p1, "p1"))

    @classmethod
    def folded(cls, p0: float, p1: float) -> "PreferenceVector":
        """Construct by reflecting each component back into [0, 1].

        The triangle-wave fold (period 2) is the learner's repair rule for
        out-of-range mutants.  Saturating at the boundary instead would let
        finite mutation steps land exactly on endpoint preferences, which
        collapses learning-time comparisons between the two machines; the
        fold matches how a cos^2-realized preference responds to linear
        overshoots of its control angle.
        """
        return cls(_fold_unit(p0), _fold_unit(p1))

    def as_tuple(self) -> tuple[float, float]:
        return (self.p0, self.p1)


@dataclass(frozen=True)
class PhaseConfig:
    """Quantum gate phases (phi0, phi1) or the target-independent phase rule.

    In FIXED mode the relative phase Delta = |phi1 - phi0| (canonicalized to
    [0, pi]) is a constant of the machine.  In TARGET_INDEPENDENT mode the
    phases are recomputed from the current preference vector on every
    evaluation: Delta_TI = pi * (p0 - p1).
    """

    phi0: float = 0.0
    phi1: float = 0.0
    mode: PhaseMode = PhaseMode.FIXED

    @classmethod
    def from_delta(cls, delta: float) -> "PhaseConfig":
        return cls(phi0=0.0, phi1=float(delta), mode=PhaseMode.FIXED)

    @classmethod
    def zero(cls) -> "PhaseConfig":
        return cls.from_delta(0.0)

    @classmethod
    def half_pi(cls) -> "PhaseConfig":
        return cls.from_delta(math.pi / 2.0)

    @classmethod
    def target_independent(cls) -> "PhaseConfig":
        return cls(phi0=0.0, phi1=0.0, mode=PhaseMode.TARGET_INDEPENDENT)

    def gate_phases(self, pref: PreferenceVector | None = None) -> tuple[float, float]:
        """Actual (phi0, phi1) to build the gates with for this evaluation."""
        if self.mode is PhaseMode.TARGET_INDEPENDENT:
            if pref is None:
                raise ValueError("target-independent phases require a preference vector")
            return (0.0, math.pi * (pref.p0 - pref.p1))
        return (self.phi0, self.phi1)

    def delta(self, pref: PreferenceVector | None = None) -> float:
        """Canonical relative phase Delta in [0, pi]."""
        phi0, phi1 = self.gate_phases(pref)
        return canonical_delta(phi1 - phi0)


@dataclass(frozen=True)
class GateMatrix:
    """A 2x2 gate: column-stochastic (classical) or unitary (quantum)."""

    matrix: np.ndarray
    kind: GateKind

    def __post_init__(self) -> None:
        if self.matrix.shape != (2, 2):
            raise ValueError(f"gate matrix must be 2x2, got shape {self.matrix.shape}")
        self.matrix.flags.writeable = False


@dataclass(frozen=True)
class WorkingState:
    """Working-channel state: probability 2-vector or 2x2 density matrix."""

    kind: Machine
    data: np.ndarray

    def __post_init__(self) -> None:
        expected = (2,) if self.kind is Machine.CLASSICAL else (2, 2)
        if self.data.shape != expected:
            raise ValueError(f"{self.kind.value} state must have shape {expected}, got {self.data.shape}")
        self.data.flags.writeable = False

    @classmethod
    def classical_bit(cls, bit: int) -> "WorkingState":
        if bit not in (0, 1):
            raise ValueError(f"working bit must be 0 or 1, got {bit}")
        v = np.zeros(2)
        v[bit] = 1.0
        return cls(Machine.CLASSICAL, v)

    @classmethod
    def quantum_bit(cls, bit: int) -> "WorkingState":
        if bit not in (0, 1):
            raise ValueError(f"working bit must be 0 or 1, got {bit}")
        rho = np.zeros((2, 2), dtype=complex)
        rho[bit, bit] = 1.0
        return cls(Machine.QUANTUM, rho)

    def validate(self, tol: float = 1e-12) -> None:
        """Check the state invariants (normalization; Hermiticity and PSD for quantum)."""
        if self.kind is Machine.CLASSICAL:
            if np.any(self.data < -tol):
                raise ValueError(f"negative probability component: {self.data}")
            if abs(float(np.sum(self.data)) - 1.0) > tol:
                raise ValueError(f"probability vector not normalized: sum={np.sum(self.data)}")
        else:
            if abs(float(np.real(np.trace(self.data))) - 1.0) > tol or abs(float(np.imag(np.trace(self.data)))) > tol:
                raise ValueError(f"density matrix trace != 1: {np.trace(self.data)}")
            if np.max(np.abs(self.data - self.data.conj().T)) > tol:
                raise ValueError("density matrix not Hermitian")
            eigenvalues = np.linalg.eigvalsh(self.data)
            if np.min(eigenvalues) < -tol:
                raise ValueError(f"density matrix not PSD: eigenvalues={eigenvalues}")


def build_classical_gate(pref_k: float) -> GateMatrix:
    """Stochastic gate [[p, 1-p], [1-p, p]] for gate-adopting preference p."""
    p = _check_probability(pref_k, "gate preference")
    q = 1.0 - p
    return GateMatrix(np.array([[p, q], [q, p]]), GateKind.STOCHASTIC)


def build_quantum_gate(pref_k: float, phi_k: float) -> GateMatrix:
    """Unitary gate [[sqrt(p), e^{i phi} sqrt(1-p)], [e^{-i phi} sqrt(1-p), -sqrt(p)]]."""
    p = _check_probability(pref_k, "gate preference")
    sp = math.sqrt(p)
    sq = math.sqrt(1.0 - p)
    e = cmath.exp(1j * float(phi_k))
    return GateMatrix(
        np.array([[sp, e * sq], [e.conjugate() * sq, -sp]], dtype=complex),
        GateKind.UNITARY,
    )


def evolve(state: WorkingState, gate: GateMatrix) -> WorkingState:
    """Apply one gate: v' = G v (classical) or rho' = G rho G^dagger (quantum)."""
    if state.kind is Machine.CLASSICAL:
        if gate.kind is not GateKind.STOCHASTIC:
            raise ValueError("classical state requires a stochastic gate")
        return WorkingState(Machine.CLASSICAL, gate.matrix @ state.data)
    if gate.kind is not GateKind.UNITARY:
        raise ValueError("quantum state requires a unitary gate")
    return WorkingState(Machine.QUANTUM, gate.matrix @ state.data @ gate.matrix.conj().T)


def dephase(state: WorkingState, gamma: float) -> WorkingState:
    """Scale the density-matrix off-diagonals by (1 - gamma); diagonal untouched.

    Equivalent to the phase-flip mixture (1 - gamma/2) rho + (gamma/2) Z rho Z.
    """
    if state.kind is not Machine.QUANTUM:
        raise ValueError("dephasing applies to quantum states only")
    g = float(gamma)
    if not 0.0 <= g <= 1.0:
        raise ValueError(f"decay rate must lie in [0, 1], got {gamma}")
    rho = state.data.copy()
    rho[0, 1] *= 1.0 - g
    rho[1, 0] *= 1.0 - g
    return WorkingState(Machine.QUANTUM, rho)


def measure(state: WorkingState) -> np.ndarray:
    """Computational-basis measurement distribution [Pr(0), Pr(1)]."""
    if state.kind is Machine.CLASSICAL:
        return state.data.copy()
    return np.real(np.diag(state.data)).copy()


def output_distribution(
    machine: Machine,
    pref: PreferenceVector,
    phases: PhaseConfig,
    gamma: float,
    x: int,
    working_input: int = 0,
) -> np.ndarray:
    """Conditional output distribution Pr(y|x) of the circuit.

    g0 is always applied; dephasing at rate gamma acts between the gates
    (quantum machine only); g1 is applied iff x = 1.  The working channel is
    prepared in ``working_input`` (0 unless building composed multi-bit
    circuits).  The classical machine coincides with the quantum machine at
    gamma = 1 for every parameter choice.
    """
    if x not in (0, 1):
        raise ValueError(f"input bit must be 0 or 1, got {x}")
    g = float(gamma)
    if not 0.0 <= g <= 1.0:
        raise ValueError(f"decay rate must lie in [0, 1], got {gamma}")
    if machine is Machine.CLASSICAL:
        state = WorkingState.classical_bit(working_input)
        state = evolve(state, build_classical_gate(pref.p0))
        if x == 1:
            state = evolve(state, build_classical_gate(pref.p1))
        return measure(state)
    phi0, phi1 = phases.gate_phases(pref)
    state = WorkingState.quantum_bit(working_input)
    state = evolve(state, build_quantum_gate(pref.p0, phi0))
    state = dephase(state, g)
    if x == 1:
        state = evolve(state, build_quantum_gate(pref.p1, phi1))
    return measure(state)

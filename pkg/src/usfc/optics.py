"""Experiment-facing layer: wave-plate angles and finite-shot estimation.

The gate-adopting preferences map onto half/quarter-wave-plate rotation angles
as p0 = cos^2(2 theta0 - varphi0 - pi/4), p1 = cos^2(2 theta1) with relative
phase Delta = 2 varphi0 + pi/2.  Fidelities are estimated from l_total
post-selected coincidence shots per input value x: with L_s(x) successful
outputs, F~ = ((L_s(0)/l_total) * (L_s(1)/l_total))^(1/4).

Dephasing during sampling comes in two statistically equivalent realizations:
damping the density-matrix off-diagonals by (1 - gamma) before measuring, or
flipping the inter-gate phase by pi on a random gamma/2 fraction of shots.
The flip fraction and the per-group success counts are exchangeable Bernoulli
sums, so the second mode draws one binomial for the flipped-shot count and one
for each group's successes rather than looping over shots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .fidelity import TaskSpec
from .model import Machine, PhaseConfig, PreferenceVector, output_distribution
from .rng import derive_rng, derive_seed

__all__ = [
    "WavePlateAngles",
    "ShotPlan",
    "DephasingMode",
    "angles_to_parameters",
    "parameters_to_angles",
    "sample_shots",
    "estimate_fidelity",
    "shot_fidelity",
]

_TWO_PI = 2.0 * math.pi


class DephasingMode(str, Enum):
    DENSITY_DAMPING = "density-damping"
    PHASE_FLIP = "phase-flip"


def _wrap(angle: float) -> float:
    wrapped = math.fmod(float(angle), _TWO_PI)
    return wrapped + _TWO_PI if wrapped < 0.0 else wrapped


@dataclass(frozen=True)
class WavePlateAngles:
    """HWP/QWP rotation angles (radians) realizing one preference vector."""

    theta0: float
    varphi0: float
    theta1: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta0", _wrap(self.theta0))
        object.__setattr__(self, "varphi0", _wrap(self.varphi0))
        object.__setattr__(self, "theta1", _wrap(self.theta1))


@dataclass(frozen=True)
class ShotPlan:
    """Coincidence shots per input value x, and the sampling seed."""

    l_total: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.l_total) < 1:
            raise ValueError(f"l_total must be at least 1, got {self.l_total}")
        object.__setattr__(self, "l_total", int(self.l_total))
        object.__setattr__(self, "seed", int(self.seed))


def angles_to_parameters(angles: WavePlateAngles) -> tuple[PreferenceVector, float]:
    """(PreferenceVector, Delta in [0, pi]) realized by a plate setting."""
    p0 = math.cos(2.0 * angles.theta0 - angles.varphi0 - math.pi / 4.0) ** 2
    p1 = math.cos(2.0 * angles.theta1) ** 2
    delta = PhaseConfig.from_delta(2.0 * angles.varphi0 + math.pi / 2.0).delta()
    return PreferenceVector(min(p0, 1.0), min(p1, 1.0)), delta


def parameters_to_angles(pref: PreferenceVector, delta: float) -> WavePlateAngles:
    """One plate setting realizing (pref, delta); principal arccos branches."""
    varphi0 = (float(delta) - math.pi / 2.0) / 2.0
    theta0 = (math.acos(math.sqrt(pref.p0)) + varphi0 + math.pi / 4.0) / 2.0
    theta1 = math.acos(math.sqrt(pref.p1)) / 2.0
    return WavePlateAngles(theta0=theta0, varphi0=varphi0, theta1=theta1)


def sample_shots(
    machine: Machine,
    pref: PreferenceVector,
    phases: PhaseConfig,
    gamma: float,
    x: int,
    plan: ShotPlan,
    target: int = 0,
    mode: DephasingMode = DephasingMode.DENSITY_DAMPING,
) -> int:
    """Successful-output count L_s(x) out of plan.l_total seeded shots."""
    if target not in (0, 1):
        raise ValueError(f"target bit must be 0 or 1, got {target}")
    rng = derive_rng(plan.seed)
    l_total = plan.l_total

    def row_probability(phase_cfg: PhaseConfig, g: float) -> float:
        # measurement rows carry 1e-16 float dust; binomial demands [0, 1]
        value = float(output_distribution(machine, pref, phase_cfg, g, x)[target])
        return min(max(value, 0.0), 1.0)

    if machine is Machine.CLASSICAL or mode is DephasingMode.DENSITY_DAMPING:
        return int(rng.binomial(l_total, row_probability(phases, gamma)))
    g = float(gamma)
    if not 0.0 <= g <= 1.0:
        raise ValueError(f"decay rate must lie in [0, 1], got {gamma}")
    phi0, phi1 = phases.gate_phases(pref)
    pr_keep = row_probability(PhaseConfig(phi0, phi1), 0.0)
    pr_flip = row_probability(PhaseConfig(phi0 + math.pi, phi1), 0.0)
    flipped = int(rng.binomial(l_total, g / 2.0))
    return int(rng.binomial(l_total - flipped, pr_keep)) + int(rng.binomial(flipped, pr_flip))


def estimate_fidelity(ls0: int, ls1: int, plan: ShotPlan) -> float:
    """F~ = ((L_s(0)/l_total) * (L_s(1)/l_total))^(1/4)."""
    for name, count in (("ls0", ls0), ("ls1", ls1)):
        if not 0 <= int(count) <= plan.l_total:
            raise ValueError(f"{name}={count} outside [0, l_total={plan.l_total}]")
    return ((ls0 / plan.l_total) * (ls1 / plan.l_total)) ** 0.25


def shot_fidelity(
    machine: Machine,
    pref: PreferenceVector,
    phases: PhaseConfig,
    gamma: float,
    task: TaskSpec,
    plan: ShotPlan,
    mode: DephasingMode = DephasingMode.DENSITY_DAMPING,
) -> float:
    """Finite-shot fidelity estimate for a single-bit task.

    Each input value samples under its own seed derived from plan.seed, so the
    two counts are independent and the whole evaluation is reproducible.
    """
    if task.n_bits != 1:
        raise ValueError("shot_fidelity estimates single-bit tasks")
    counts = []
    for x in (0, 1):
        sub_plan = ShotPlan(plan.l_total, derive_seed(plan.seed, x))
        counts.append(sample_shots(machine, pref, phases, gamma, x, sub_plan, task.target_bit(str(x)), mode))
    return estimate_fidelity(counts[0], counts[1], plan)

"""Differential-evolution training of the gate-adopting preferences.

One trial evolves M agents (preference vectors on [0,1]^2) by the classic
mutate / crossover / greedy-select generation loop:

  step 1   nu_i = p_a + W (p_b - p_c), indices a,b,c mutually distinct,
           components reflected back into [0,1];
  step 2   t_j <- p_j if r_j > C_r else nu_j, fresh uniform r_j per component;
  step 3   t_i replaces p_i only on strictly greater fitness.

Fitness is the task fidelity, either exact or estimated from finite shots.
The trial stops once the running best fitness reaches 1 - epsilon_t, or is
declared failed after max_iterations generation sweeps.  Every random draw
comes from generators derived off the trial seed, so records are bit-exact
reproducible: the DE stream lives at path (seed, 0) and each shot-based
fitness evaluation gets its own seed at (seed, 1, iteration, agent, role).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fidelity import TaskSpec, circuit_fidelity
from .model import Machine, PhaseConfig, PreferenceVector
from .optics import DephasingMode, ShotPlan, shot_fidelity
from .rng import derive_rng, derive_seed

__all__ = [
    "DEConfig",
    "Population",
    "TrialRecord",
    "initialize",
    "mutate",
    "crossover",
    "select",
    "run_trial",
]

_INCUMBENT_ROLE = 0
_TRIAL_ROLE = 1


@dataclass(frozen=True)
class DEConfig:
    """Full specification of one differential-evolution training run."""

    m: int = 10
    w: float = 0.5
    cr: float = 0.5
    epsilon_t: float = 0.01
    max_iterations: int = 100
    machine: Machine = Machine.CLASSICAL
    phases: PhaseConfig = field(default_factory=PhaseConfig.zero)
    gamma: float = 0.0
    shots: ShotPlan | None = None
    shot_mode: DephasingMode = DephasingMode.DENSITY_DAMPING
    reevaluate_incumbent: bool = True

    def __post_init__(self) -> None:
        if int(self.m) < 3:
            raise ValueError(f"population size must be at least 3, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if not math.isfinite(float(self.w)):
            raise ValueError(f"differential weight must be finite, got {self.w}")
        if not 0.0 <= float(self.cr) <= 1.0:
            raise ValueError(f"crossover rate must lie in [0, 1], got {self.cr}")
        if not 0.0 < float(self.epsilon_t) < 1.0:
            raise ValueError(f"error tolerance must lie in (0, 1), got {self.epsilon_t}")
        if int(self.max_iterations) < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")
        object.__setattr__(self, "max_iterations", int(self.max_iterations))
        if not 0.0 <= float(self.gamma) <= 1.0:
            raise ValueError(f"decay rate must lie in [0, 1], got {self.gamma}")

    @property
    def target_fidelity(self) -> float:
        return 1.0 - self.epsilon_t


@dataclass
class Population:
    """Current agents with fitness, plus the best vector seen so far."""

    agents: list[PreferenceVector]
    fitness: list[float]
    best_pref: PreferenceVector
    best_f: float

    def observe(self, pref: PreferenceVector, f: float) -> None:
        if f > self.best_f:
            self.best_f = f
            self.best_pref = pref


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one training trial.

    best_pref is the winning preference vector; downstream circuit assembly
    reads it, statistics ignore it.
    """

    seed: int
    iterations_run: int
    converged: bool
    completion_iteration: int | None
    best_f_per_iteration: tuple[float, ...]
    best_pref: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "best_f_per_iteration", tuple(float(f) for f in self.best_f_per_iteration))
        if self.best_pref is not None:
            object.__setattr__(self, "best_pref", (float(self.best_pref[0]), float(self.best_pref[1])))

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "iterations_run": self.iterations_run,
                "converged": self.converged,
                "completion_iteration": self.completion_iteration,
                "best_f_per_iteration": list(self.best_f_per_iteration),
                "best_pref": None if self.best_pref is None else list(self.best_pref),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json_line(cls, line: str) -> "TrialRecord":
        payload = json.loads(line)
        best_pref = payload.get("best_pref")
        return cls(
            seed=payload["seed"],
            iterations_run=payload["iterations_run"],
            converged=payload["converged"],
            completion_iteration=payload["completion_iteration"],
            best_f_per_iteration=tuple(payload["best_f_per_iteration"]),
            best_pref=None if best_pref is None else (best_pref[0], best_pref[1]),
        )


def mutate(pop: Population, i: int, w: float, rng: np.random.Generator) -> PreferenceVector:
    """Mutant nu_i = p_a + w (p_b - p_c), reflected back into [0, 1]^2.

    The indices a, b, c are mutually distinct but may coincide with i:
    requiring a, b, c != i would need M >= 4, and the minimum population
    size is 3.  Out-of-range components are repaired by the triangle-wave
    fold rather than saturation, so overshooting steps never pile up
    exactly on an endpoint preference.
    """
    a, b, c = rng.choice(len(pop.agents), size=3, replace=False)
    pa, pb, pc = pop.agents[a].as_tuple(), pop.agents[b].as_tuple(), pop.agents[c].as_tuple()
    return PreferenceVector.folded(
        pa[0] + w * (pb[0] - pc[0]),
        pa[1] + w * (pb[1] - pc[1]),
    )


def crossover(
    incumbent: PreferenceVector,
    mutant: PreferenceVector,
    cr: float,
    rng: np.random.Generator,
) -> PreferenceVector:
    """Trial vector: keep the incumbent component where r_j > cr, else the mutant's."""
    r = rng.random(2)
    p, nu = incumbent.as_tuple(), mutant.as_tuple()
    return PreferenceVector(
        p[0] if r[0] > cr else nu[0],
        p[1] if r[1] > cr else nu[1],
    )


def select(
    incumbent: PreferenceVector,
    trial: PreferenceVector,
    fitness_fn: Callable[[PreferenceVector], float],
) -> tuple[PreferenceVector, float]:
    """Greedy selection: the trial survives only on strictly greater fitness."""
    f_trial = fitness_fn(trial)
    f_incumbent = fitness_fn(incumbent)
    if f_trial > f_incumbent:
        return trial, f_trial
    return incumbent, f_incumbent


def _evaluator(
    config: DEConfig, task: TaskSpec, trial_seed: int
) -> Callable[[PreferenceVector, int, int, int], float]:
    if config.shots is None:
        def exact(pref: PreferenceVector, iteration: int, agent: int, role: int) -> float:
            return circuit_fidelity(config.machine, pref, config.phases, config.gamma, task)

        return exact
    l_total = config.shots.l_total

    def shots(pref: PreferenceVector, iteration: int, agent: int, role: int) -> float:
        plan = ShotPlan(l_total, derive_seed(trial_seed, 1, iteration, agent, role))
        return shot_fidelity(config.machine, pref, config.phases, config.gamma, task, plan, config.shot_mode)

    return shots


def _draw_agents(config: DEConfig, rng: np.random.Generator) -> list[PreferenceVector]:
    return [PreferenceVector(*rng.random(2)) for _ in range(config.m)]


def _population_from(agents: list[PreferenceVector], fitness: list[float]) -> Population:
    best = int(np.argmax(fitness))
    return Population(agents=agents, fitness=fitness, best_pref=agents[best], best_f=fitness[best])


def initialize(
    config: DEConfig,
    rng: np.random.Generator,
    fitness_fn: Callable[[PreferenceVector], float],
) -> Population:
    """Uniform random population on [0,1]^2 with every agent evaluated."""
    agents = _draw_agents(config, rng)
    return _population_from(agents, [fitness_fn(agent) for agent in agents])


def run_trial(config: DEConfig, task: TaskSpec, seed: int) -> TrialRecord:
    """One full training trial; bit-exact reproducible from (config, task, seed)."""
    if task.n_bits != 1:
        raise ValueError("training operates on single-bit tasks")
    rng = derive_rng(seed, 0)
    evaluate = _evaluator(config, task, seed)
    reevaluate = config.reevaluate_incumbent and config.shots is not None

    agents = _draw_agents(config, rng)
    pop = _population_from(agents, [evaluate(agent, 0, i, _INCUMBENT_ROLE) for i, agent in enumerate(agents)])

    best_series = [pop.best_f]
    converged = pop.best_f >= config.target_fidelity
    completion: int | None = 0 if converged else None
    iterations_run = 0

    for iteration in range(1, config.max_iterations + 1):
        if converged:
            break
        iterations_run = iteration
        mutants = [mutate(pop, i, config.w, rng) for i in range(config.m)]
        trials = [crossover(pop.agents[i], mutants[i], config.cr, rng) for i in range(config.m)]
        next_agents: list[PreferenceVector] = []
        next_fitness: list[float] = []
        for i in range(config.m):
            f_trial = evaluate(trials[i], iteration, i, _TRIAL_ROLE)
            if reevaluate:
                f_incumbent = evaluate(pop.agents[i], iteration, i, _INCUMBENT_ROLE)
            else:
                f_incumbent = pop.fitness[i]
            pop.observe(trials[i], f_trial)
            pop.observe(pop.agents[i], f_incumbent)
            if f_trial > f_incumbent:
                next_agents.append(trials[i])
                next_fitness.append(f_trial)
            else:
                next_agents.append(pop.agents[i])
                next_fitness.append(f_incumbent)
        pop.agents, pop.fitness = next_agents, next_fitness
        best_series.append(pop.best_f)
        if pop.best_f >= config.target_fidelity:
            converged = True
            completion = iteration

    return TrialRecord(
        seed=int(seed),
        iterations_run=iterations_run,
        converged=converged,
        completion_iteration=completion,
        best_f_per_iteration=tuple(best_series),
        best_pref=pop.best_pref.as_tuple(),
    )

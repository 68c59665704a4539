"""Batch orchestration and statistics over training trials.

Produces plot-ready data: learning-probability curves P(n) with integrated
Gaussian fits, quantum-vs-classical speed-up percentages with bootstrap
confidence intervals, decoherence series n_c(gamma), and (W, C_r)
hyperparameter maps.

Seeding: every batch owns a label string canonically describing the physics
it runs (machine, task, phase policy, decay rate).  The label is hashed into
the seed path, so two commands that run the same physical batch under the
same master seed produce bit-identical trial records regardless of which
figure they serve.  Within a batch, trial t runs at derived seed
(batch_seed, t); worker count never changes results.
"""
from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import erf

from .fidelity import TaskSpec, canonical_task, CanonicalTask
from .learner import DEConfig, TrialRecord, run_trial
from .model import Machine, PhaseConfig, PhaseMode
from .rng import batch_seed, derive_rng, derive_seed

__all__ = [
    "GaussianFit",
    "LearningProbabilityCurve",
    "SpeedupEstimate",
    "GammaPoint",
    "DecoherenceResult",
    "SweepGrid",
    "batch_label",
    "task_tag",
    "run_batch",
    "labeled_batch",
    "fit_integrated_gaussian",
    "learning_probability",
    "speedup",
    "speedup_with_ci",
    "bootstrap_center_ci",
    "decoherence_sweep",
    "parameter_sweep",
    "default_w_grid",
    "default_cr_grid",
    "write_records_jsonl",
    "read_records_jsonl",
    "write_curve_csv",
    "write_sweep_csv",
    "write_summary_json",
]

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# labels and seeding


def task_tag(task: TaskSpec) -> str:
    """Short canonical tag for a task: T1..T4 for the single-bit ones."""
    for member in CanonicalTask:
        if task == canonical_task(member):
            return member.value
    return hashlib.sha256(task.to_json().encode("utf-8")).hexdigest()[:8]


def _phase_tag(phases: PhaseConfig) -> str:
    if phases.mode is PhaseMode.TARGET_INDEPENDENT:
        return "ti"
    return f"{phases.delta():.12g}"


def batch_label(machine: Machine, phases: PhaseConfig, gamma: float, task: TaskSpec) -> str:
    """Canonical physics label of one batch; equal physics => equal label."""
    if machine is Machine.CLASSICAL:
        # phases and decay are inert on the classical machine
        return f"classical|task={task_tag(task)}"
    return f"quantum|task={task_tag(task)}|delta={_phase_tag(phases)}|gamma={float(gamma):.12g}"


def _config_label(config: DEConfig, task: TaskSpec) -> str:
    return batch_label(config.machine, config.phases, config.gamma, task)


# ---------------------------------------------------------------------------
# batches


def _run_seeded_trial(args: tuple[DEConfig, TaskSpec, int]) -> TrialRecord:
    config, task, seed = args
    return run_trial(config, task, seed)


def run_batch(
    config: DEConfig,
    task: TaskSpec,
    trials: int,
    master_seed: int,
    workers: int = 1,
) -> list[TrialRecord]:
    """Independent seeded trials; bit-exact for any worker count."""
    if int(trials) < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    jobs = [(config, task, derive_seed(master_seed, t)) for t in range(int(trials))]
    if workers <= 1 or len(jobs) == 1:
        return [_run_seeded_trial(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seeded_trial, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


def labeled_batch(
    config: DEConfig,
    task: TaskSpec,
    trials: int,
    master_seed: int,
    workers: int = 1,
) -> list[TrialRecord]:
    """run_batch under the batch's canonical physics label."""
    return run_batch(config, task, trials, batch_seed(master_seed, _config_label(config, task)), workers)


# ---------------------------------------------------------------------------
# learning-probability curves and fits


@dataclass(frozen=True)
class GaussianFit:
    """Integrated-Gaussian fit of the completion-iteration distribution."""

    n_c: float
    sigma_n: float
    residual: float

    def __post_init__(self) -> None:
        if not self.sigma_n > 0.0:
            raise ValueError(f"fitted width must be positive, got {self.sigma_n}")

    def density(self, n: np.ndarray | float) -> np.ndarray | float:
        z = (np.asarray(n, dtype=float) - self.n_c) / self.sigma_n
        return np.exp(-0.5 * z * z) / (self.sigma_n * math.sqrt(2.0 * math.pi))

    def to_dict(self) -> dict:
        return {"n_c": self.n_c, "sigma_n": self.sigma_n, "residual": self.residual}


def _integrated_gaussian(n: np.ndarray, n_c: float, sigma: float) -> np.ndarray:
    # half-step continuity correction: a completion recorded at integer n
    # represents a crossing anywhere below n + 1/2 on the iteration axis,
    # so the empirical CDF at n estimates the integral up to n + 1/2
    return 0.5 * (1.0 + erf((n + 0.5 - n_c) / (sigma * _SQRT2)))


def fit_integrated_gaussian(
    completions: Sequence[int],
    grid: Sequence[int] | None = None,
) -> GaussianFit | None:
    """Least-squares fit of the empirical completion CDF to an integrated Gaussian.

    The model CDF carries a half-step continuity correction for the integer
    iteration axis, which removes the 1/2-iteration bias a plain Gaussian
    integral would have on rounded data.  Returns None when the data cannot
    support a two-parameter fit (fewer than two distinct completion
    iterations) or the fit fails to converge.
    """
    values = np.asarray(sorted(completions), dtype=float)
    if values.size < 2 or np.unique(values).size < 2:
        return None
    n_grid = np.arange(0.0, values.max() + 1.0) if grid is None else np.asarray(grid, dtype=float)
    cdf = np.searchsorted(values, n_grid, side="right") / values.size
    p0 = (float(values.mean()), max(float(values.std()), 0.5))
    try:
        popt, _ = curve_fit(
            _integrated_gaussian,
            n_grid,
            cdf,
            p0=p0,
            bounds=((-np.inf, 1e-9), (np.inf, np.inf)),
        )
    except (RuntimeError, ValueError):
        return None
    residual = float(np.sum((_integrated_gaussian(n_grid, *popt) - cdf) ** 2))
    return GaussianFit(n_c=float(popt[0]), sigma_n=float(popt[1]), residual=residual)


@dataclass(frozen=True)
class LearningProbabilityCurve:
    """Empirical P(n) over a batch plus its Gaussian fit (if available)."""

    total_trials: int
    n_grid: tuple[int, ...]
    p_of_n: tuple[float, ...]
    counts_by_iteration: dict[int, int]
    converged_fraction: float
    fit: GaussianFit | None

    def density(self) -> tuple[float, ...] | None:
        if self.fit is None:
            return None
        return tuple(float(v) for v in self.fit.density(np.asarray(self.n_grid, dtype=float)))


def learning_probability(records: Sequence[TrialRecord]) -> LearningProbabilityCurve:
    """Empirical completion CDF P(n) = #(completion <= n) / T with its fit.

    P(n) is a fraction of all trials, so it plateaus at the converged fraction.
    The Gaussian is fitted to the completion distribution of the converged
    trials only; failed trials are reported through converged_fraction.
    """
    if not records:
        raise ValueError("learning_probability requires at least one record")
    total = len(records)
    completions = [r.completion_iteration for r in records if r.converged]
    horizon = max(r.iterations_run for r in records)
    if completions:
        horizon = max(horizon, max(completions))
    n_grid = np.arange(0, horizon + 1)
    sorted_completions = np.asarray(sorted(completions), dtype=float)
    p_of_n = np.searchsorted(sorted_completions, n_grid, side="right") / total
    fit = fit_integrated_gaussian(completions, grid=n_grid) if completions else None
    return LearningProbabilityCurve(
        total_trials=total,
        n_grid=tuple(int(n) for n in n_grid),
        p_of_n=tuple(float(p) for p in p_of_n),
        counts_by_iteration=dict(sorted(Counter(completions).items())),
        converged_fraction=len(completions) / total,
        fit=fit,
    )


# ---------------------------------------------------------------------------
# speed-up statistics


def speedup(classical: GaussianFit, quantum: GaussianFit) -> float:
    """(n_c^C - n_c^Q) / n_c^C as a percentage."""
    if classical is None or quantum is None:
        raise ValueError("speedup requires valid fits for both machines")
    if not classical.n_c > 0.0:
        raise ValueError(f"classical center must be positive, got {classical.n_c}")
    return (classical.n_c - quantum.n_c) / classical.n_c * 100.0


@dataclass(frozen=True)
class SpeedupEstimate:
    percent: float
    ci95: tuple[float, float]
    ci99: tuple[float, float]
    resamples: int
    resamples_used: int

    def to_dict(self) -> dict:
        return {
            "speedup_pct": self.percent,
            "ci95": list(self.ci95),
            "ci99": list(self.ci99),
            "resamples": self.resamples,
            "resamples_used": self.resamples_used,
        }


def _bootstrap_center(records: Sequence[TrialRecord], rng: np.random.Generator) -> float | None:
    indices = rng.integers(0, len(records), size=len(records))
    completions = [records[i].completion_iteration for i in indices if records[i].converged]
    fit = fit_integrated_gaussian(completions)
    if fit is None or not fit.n_c > 0.0:
        return None
    return fit.n_c


def speedup_with_ci(
    classical_records: Sequence[TrialRecord],
    quantum_records: Sequence[TrialRecord],
    seed: int,
    resamples: int = 1000,
) -> SpeedupEstimate:
    """Percentile-bootstrap confidence intervals for the speed-up percentage.

    Each resample redraws whole trials (with replacement, failures included)
    from both batches independently and refits both Gaussian centers.
    """
    if resamples < 100:
        raise ValueError(f"at least 100 resamples required, got {resamples}")
    curve_c = learning_probability(classical_records)
    curve_q = learning_probability(quantum_records)
    if curve_c.fit is None or curve_q.fit is None:
        raise ValueError("speedup requires fittable completion distributions for both machines")
    point = speedup(curve_c.fit, curve_q.fit)
    rng = derive_rng(seed)
    samples = []
    for _ in range(resamples):
        nc_c = _bootstrap_center(classical_records, rng)
        nc_q = _bootstrap_center(quantum_records, rng)
        if nc_c is None or nc_q is None:
            continue
        samples.append((nc_c - nc_q) / nc_c * 100.0)
    if len(samples) < resamples // 2:
        raise ValueError(f"bootstrap degenerate: only {len(samples)}/{resamples} resamples usable")
    arr = np.asarray(samples)
    ci95 = (float(np.percentile(arr, 2.5)), float(np.percentile(arr, 97.5)))
    ci99 = (float(np.percentile(arr, 0.5)), float(np.percentile(arr, 99.5)))
    return SpeedupEstimate(percent=point, ci95=ci95, ci99=ci99, resamples=resamples, resamples_used=len(arr))


def bootstrap_center_ci(
    records: Sequence[TrialRecord],
    seed: int,
    resamples: int = 1000,
    level: float = 0.95,
) -> tuple[float, float]:
    """Percentile-bootstrap CI for one batch's fitted center n_c."""
    rng = derive_rng(seed)
    samples = []
    for _ in range(resamples):
        center = _bootstrap_center(records, rng)
        if center is not None:
            samples.append(center)
    if len(samples) < resamples // 2:
        raise ValueError(f"bootstrap degenerate: only {len(samples)}/{resamples} resamples usable")
    tail = 100.0 * (1.0 - level) / 2.0
    arr = np.asarray(samples)
    return (float(np.percentile(arr, tail)), float(np.percentile(arr, 100.0 - tail)))


# ---------------------------------------------------------------------------
# decoherence series


@dataclass(frozen=True)
class GammaPoint:
    gamma: float
    records: tuple[TrialRecord, ...]
    curve: LearningProbabilityCurve


@dataclass(frozen=True)
class DecoherenceResult:
    points: tuple[GammaPoint, ...]
    classical_records: tuple[TrialRecord, ...]
    classical_curve: LearningProbabilityCurve


def decoherence_sweep(
    base_config: DEConfig,
    task: TaskSpec,
    gammas: Sequence[float],
    trials_per_gamma: int,
    master_seed: int,
    workers: int = 1,
) -> DecoherenceResult:
    """Quantum batches across decay rates plus the classical reference batch."""
    points = []
    for gamma in gammas:
        config = replace(base_config, machine=Machine.QUANTUM, gamma=float(gamma))
        records = labeled_batch(config, task, trials_per_gamma, master_seed, workers)
        points.append(GammaPoint(gamma=float(gamma), records=tuple(records), curve=learning_probability(records)))
    classical = replace(base_config, machine=Machine.CLASSICAL, gamma=0.0)
    classical_records = labeled_batch(classical, task, trials_per_gamma, master_seed, workers)
    return DecoherenceResult(
        points=tuple(points),
        classical_records=tuple(classical_records),
        classical_curve=learning_probability(classical_records),
    )


# ---------------------------------------------------------------------------
# (W, C_r) hyperparameter sweep


def default_w_grid() -> tuple[float, ...]:
    return tuple(round(0.1 * k, 10) for k in range(21))


def default_cr_grid() -> tuple[float, ...]:
    return tuple(round(0.05 * k, 10) for k in range(21))


@dataclass(frozen=True)
class SweepGrid:
    """Mean completion iterations and failure counts over a (W, C_r) grid."""

    w_values: tuple[float, ...]
    cr_values: tuple[float, ...]
    n_c_grid: np.ndarray  # shape (len(w), len(cr)); NaN where nothing converged
    fail_grid: np.ndarray  # same shape, integer counts
    best_cell: tuple[float, float]

    def best_indices(self) -> tuple[int, int]:
        return (self.w_values.index(self.best_cell[0]), self.cr_values.index(self.best_cell[1]))


def _pick_best_cell(
    w_values: Sequence[float],
    cr_values: Sequence[float],
    n_c_grid: np.ndarray,
    fail_grid: np.ndarray,
    fail_threshold: int,
) -> tuple[float, float]:
    candidates = [
        (n_c_grid[i, j], i, j)
        for i in range(len(w_values))
        for j in range(len(cr_values))
        if fail_grid[i, j] <= fail_threshold and not math.isnan(n_c_grid[i, j])
    ]
    if not candidates:
        # nothing meets the failure budget: fall back to the most reliable cells
        floor = int(fail_grid.min())
        candidates = [
            (n_c_grid[i, j], i, j)
            for i in range(len(w_values))
            for j in range(len(cr_values))
            if fail_grid[i, j] == floor and not math.isnan(n_c_grid[i, j])
        ]
    if not candidates:
        raise ValueError("no sweep cell produced a converged trial")
    _, i, j = min(candidates, key=lambda item: (item[0], item[1], item[2]))
    return (w_values[i], cr_values[j])


def parameter_sweep(
    base_config: DEConfig,
    task: TaskSpec,
    w_values: Sequence[float] | None = None,
    cr_values: Sequence[float] | None = None,
    trials_per_cell: int = 100,
    master_seed: int = 0,
    fail_threshold: int = 0,
    workers: int = 1,
) -> SweepGrid:
    """Mean completion iteration and failure count per (W, C_r) cell.

    A cell's n_c is the mean completion iteration over its converged trials.
    The best cell is the lowest n_c among cells with at most fail_threshold
    failures (ties broken toward lower W then lower C_r); if no cell meets
    the budget, the minimum-failure cells are used instead.
    """
    ws = tuple(float(w) for w in (default_w_grid() if w_values is None else w_values))
    crs = tuple(float(c) for c in (default_cr_grid() if cr_values is None else cr_values))
    if not ws or not crs:
        raise ValueError("sweep grids must be non-empty")
    n_c_grid = np.full((len(ws), len(crs)), np.nan)
    fail_grid = np.zeros((len(ws), len(crs)), dtype=int)
    base_label = _config_label(base_config, task)
    for i, w in enumerate(ws):
        for j, cr in enumerate(crs):
            config = replace(base_config, w=w, cr=cr)
            cell_seed = batch_seed(master_seed, f"{base_label}|w={w:.12g}|cr={cr:.12g}")
            records = run_batch(config, task, trials_per_cell, cell_seed, workers)
            completions = [r.completion_iteration for r in records if r.converged]
            fail_grid[i, j] = sum(not r.converged for r in records)
            if completions:
                n_c_grid[i, j] = float(np.mean(completions))
    best = _pick_best_cell(ws, crs, n_c_grid, fail_grid, fail_threshold)
    return SweepGrid(w_values=ws, cr_values=crs, n_c_grid=n_c_grid, fail_grid=fail_grid, best_cell=best)


# ---------------------------------------------------------------------------
# deterministic writers (LF endings, %.17g floats)


def _fmt(value: float) -> str:
    return "%.17g" % float(value)


def write_records_jsonl(path, records: Iterable[TrialRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record.to_json_line())
            fh.write("\n")


def read_records_jsonl(path) -> list[TrialRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return [TrialRecord.from_json_line(line) for line in fh if line.strip()]


def write_curve_csv(path, curve: LearningProbabilityCurve) -> None:
    density = curve.density()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,P_n,rho_n\n")
        for idx, n in enumerate(curve.n_grid):
            rho = _fmt(density[idx]) if density is not None else ""
            fh.write(f"{n},{_fmt(curve.p_of_n[idx])},{rho}\n")


def write_sweep_csv(path, grid: SweepGrid) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("W,Cr,n_c,fails\n")
        for i, w in enumerate(grid.w_values):
            for j, cr in enumerate(grid.cr_values):
                fh.write(f"{_fmt(w)},{_fmt(cr)},{_fmt(grid.n_c_grid[i, j])},{int(grid.fail_grid[i, j])}\n")


def write_summary_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")

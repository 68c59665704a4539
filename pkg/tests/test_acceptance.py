"""Headline acceptance gate.

Each test is marked ``acceptance(k, title)`` and checks one release-blocking
behaviour at full protocol scale; conftest prints one PASS/FAIL line per
criterion after the run.  The parameter sweep criterion re-runs the frozen
tuning protocol, so the whole gate takes tens of minutes on one core.
"""
import json
import math
import time

import numpy as np
import pytest
from scipy.optimize import isotonic_regression

from usfc.cli import main
from usfc.experiments import (
    decoherence_sweep,
    bootstrap_center_ci,
    labeled_batch,
    parameter_sweep,
    speedup_with_ci,
)
from usfc.fidelity import (
    CanonicalTask,
    canonical_task,
    circuit_fidelity,
    fidelity_gap_batch,
)
from usfc.learner import DEConfig, crossover, initialize, mutate, select
from usfc.model import Machine, PhaseConfig, PreferenceVector, output_distribution
from usfc.nbit import NBitTrainingSet, assembled_fidelity, train_all
from usfc.optics import ShotPlan, shot_fidelity
from usfc.rng import batch_seed, derive_rng, derive_seed
from usfc.tuning import SWEEP_SEED, SWEEP_TRIALS_PER_CELL, TUNED_CR, TUNED_W

MASTER = 0
TRIALS = 200
T1 = canonical_task(CanonicalTask.T1)

SETTINGS = {
    "classical": (Machine.CLASSICAL, PhaseConfig.zero()),
    "delta0": (Machine.QUANTUM, PhaseConfig.zero()),
    "half-pi": (Machine.QUANTUM, PhaseConfig.half_pi()),
    "ti": (Machine.QUANTUM, PhaseConfig.target_independent()),
    "delta-pi": (Machine.QUANTUM, PhaseConfig.from_delta(math.pi)),
}


def tuned_config(machine, phases, gamma=0.0, epsilon_t=0.01):
    return DEConfig(
        m=10,
        w=TUNED_W,
        cr=TUNED_CR,
        epsilon_t=epsilon_t,
        max_iterations=100,
        machine=machine,
        phases=phases,
        gamma=gamma,
    )


def overlaps(a, b):
    return a[0] <= b[1] and b[0] <= a[1]


@pytest.fixture(scope="session")
def headline_batches():
    return {
        name: labeled_batch(tuned_config(*SETTINGS[name]), T1, TRIALS, MASTER)
        for name in ("classical", "delta0", "half-pi", "ti")
    }


@pytest.fixture(scope="session")
def headline_speedups(headline_batches):
    return {
        name: speedup_with_ci(
            headline_batches["classical"],
            headline_batches[name],
            batch_seed(MASTER, f"acceptance|speedup|{name}"),
        )
        for name in ("delta0", "half-pi", "ti")
    }


@pytest.fixture(scope="session")
def dephasing_scan():
    base = tuned_config(Machine.QUANTUM, PhaseConfig.zero())
    return decoherence_sweep(base, T1, [0.0, 0.25, 0.5, 0.75, 1.0], 100, MASTER)


@pytest.fixture(scope="session")
def destructive_records():
    config = tuned_config(*SETTINGS["delta-pi"])
    return labeled_batch(config, T1, TRIALS, MASTER)


@pytest.fixture(scope="session")
def classical_sweep_grid():
    base = tuned_config(*SETTINGS["classical"])
    return parameter_sweep(
        base,
        T1,
        trials_per_cell=SWEEP_TRIALS_PER_CELL,
        master_seed=SWEEP_SEED,
        fail_threshold=0,
    )


# -- 1: closed-form gap identity ---------------------------------------------


@pytest.mark.acceptance(1, "closed-form advantage identity on 10^4 draws in < 1 s")
def test_gap_identity_on_random_draws():
    rng = derive_rng(batch_seed(MASTER, "acceptance|identity"))
    started = time.perf_counter()
    draws = rng.random((10_000, 3))
    deltas = (2.0 * draws[:, 2] - 1.0) * math.pi
    gaps = fidelity_gap_batch(draws[:, 0], draws[:, 1], deltas)
    elapsed = time.perf_counter() - started

    p0, p1 = draws[:, 0], draws[:, 1]
    expected = 2.0 * p0 * np.sqrt(p0 * (1.0 - p0) * p1 * (1.0 - p1)) * np.cos(deltas)
    assert float(np.max(np.abs(gaps - expected))) < 1e-10
    assert elapsed < 1.0


# -- 2: gamma = 1 equivalence -------------------------------------------------


@pytest.mark.acceptance(2, "fully dephased machine reproduces the classical one")
def test_full_dephasing_matches_classical_on_dense_grid():
    values = np.linspace(0.0, 1.0, 101)
    worst = 0.0
    for delta in (0.0, 2.2):
        phases = PhaseConfig.from_delta(delta)
        for p0 in values:
            for p1 in values:
                pref = PreferenceVector(p0, p1)
                for x in (0, 1):
                    quantum = output_distribution(Machine.QUANTUM, pref, phases, 1.0, x)
                    classical = output_distribution(
                        Machine.CLASSICAL, pref, phases, 0.0, x
                    )
                    worst = max(worst, float(np.max(np.abs(quantum - classical))))
    assert worst < 1e-12


@pytest.mark.acceptance(2, "fully dephased machine reproduces the classical one")
def test_full_dephasing_center_indistinguishable(dephasing_scan):
    saturated = dephasing_scan.points[-1]
    assert saturated.gamma == 1.0
    ci_q = bootstrap_center_ci(
        saturated.records, batch_seed(MASTER, "acceptance|ci|gamma-1")
    )
    ci_c = bootstrap_center_ci(
        dephasing_scan.classical_records, batch_seed(MASTER, "acceptance|ci|classical")
    )
    assert overlaps(ci_q, ci_c)


# -- 3: headline speed-up ------------------------------------------------------


@pytest.mark.acceptance(3, "constructive and target-independent speed-ups in [20%, 50%]")
@pytest.mark.parametrize("name", ["delta0", "ti"])
def test_speedup_reproduced(headline_speedups, name):
    est = headline_speedups[name]
    assert 20.0 <= est.percent <= 50.0
    assert est.ci95[0] > 0.0


@pytest.mark.acceptance(3, "constructive and target-independent speed-ups in [20%, 50%]")
def test_orthogonal_phase_speedup_consistent_with_zero(headline_speedups):
    est = headline_speedups["half-pi"]
    assert est.ci95[0] <= 0.0 <= est.ci95[1]


# -- 4: decoherence trend ------------------------------------------------------


@pytest.fixture(scope="session")
def scan_centers(dephasing_scan):
    centers, half_widths = [], []
    for point in dephasing_scan.points:
        assert point.curve.fit is not None
        ci = bootstrap_center_ci(
            point.records, batch_seed(MASTER, f"acceptance|ci|gamma={point.gamma:.12g}")
        )
        centers.append(point.curve.fit.n_c)
        half_widths.append((ci[1] - ci[0]) / 2.0)
    return np.asarray(centers), np.asarray(half_widths)


@pytest.mark.acceptance(4, "learning slows monotonically with dephasing")
def test_centers_nondecreasing_within_noise(scan_centers):
    centers, half_widths = scan_centers
    fitted = isotonic_regression(centers, weights=1.0 / half_widths**2).x
    assert np.all(np.abs(centers - fitted) <= half_widths)


@pytest.mark.acceptance(4, "learning slows monotonically with dephasing")
def test_scan_endpoints_match_baselines(dephasing_scan, headline_batches):
    clean = dephasing_scan.points[0]
    assert clean.gamma == 0.0
    ci_clean = bootstrap_center_ci(
        clean.records, batch_seed(MASTER, "acceptance|ci|gamma-0")
    )
    ci_headline = bootstrap_center_ci(
        headline_batches["delta0"], batch_seed(MASTER, "acceptance|ci|headline-delta0")
    )
    assert overlaps(ci_clean, ci_headline)

    saturated = dephasing_scan.points[-1]
    ci_saturated = bootstrap_center_ci(
        saturated.records, batch_seed(MASTER, "acceptance|ci|gamma-1")
    )
    ci_classical = bootstrap_center_ci(
        dephasing_scan.classical_records, batch_seed(MASTER, "acceptance|ci|classical")
    )
    assert overlaps(ci_saturated, ci_classical)


@pytest.mark.acceptance(4, "learning slows monotonically with dephasing")
def test_speedup_survives_moderate_dephasing(dephasing_scan):
    for point in dephasing_scan.points:
        if point.gamma > 0.5:
            continue
        est = speedup_with_ci(
            dephasing_scan.classical_records,
            point.records,
            batch_seed(MASTER, f"acceptance|speedup|gamma={point.gamma:.12g}"),
        )
        assert est.ci95[0] > 0.0, f"gamma={point.gamma}: ci95={est.ci95}"


# -- 5: shot-noise estimator ---------------------------------------------------


@pytest.mark.acceptance(5, "10^5-shot fidelity estimate within 0.01 in >= 99% of reps")
@pytest.mark.parametrize("target", [0.3, 0.5, 0.9, 0.99])
def test_shot_estimator_accuracy(target):
    pref = PreferenceVector(target**2, 1.0)
    exact = circuit_fidelity(Machine.CLASSICAL, pref, PhaseConfig.zero(), 0.0, T1)
    assert exact == pytest.approx(target, abs=1e-12)

    base = batch_seed(MASTER, f"acceptance|shots|{target}")
    hits = 0
    for rep in range(1000):
        plan = ShotPlan(l_total=100_000, seed=derive_seed(base, rep))
        estimate = shot_fidelity(
            Machine.CLASSICAL, pref, PhaseConfig.zero(), 0.0, T1, plan
        )
        hits += abs(estimate - target) < 0.01
    assert hits >= 990


# -- 6: optimizer mechanics ----------------------------------------------------


@pytest.mark.acceptance(6, "optimizer mechanics: monotone, bounded, guarded")
def test_best_fitness_series_monotone_on_every_trial(headline_batches):
    for records in headline_batches.values():
        for record in records:
            series = np.asarray(record.best_f_per_iteration)
            assert np.all(np.diff(series) >= 0.0)


@pytest.mark.acceptance(6, "optimizer mechanics: monotone, bounded, guarded")
def test_population_stays_in_unit_square():
    def fitness(pref):
        return circuit_fidelity(Machine.CLASSICAL, pref, PhaseConfig.zero(), 0.0, T1)

    # W = 2 maximizes overshoot, C_r = 1 takes every mutant component
    config = DEConfig(m=10, w=2.0, cr=1.0, machine=Machine.CLASSICAL)
    for trial in range(5):
        rng = derive_rng(batch_seed(MASTER, "acceptance|bounds"), trial)
        pop = initialize(config, rng, fitness)
        for _ in range(25):
            for i in range(len(pop.agents)):
                mutant = mutate(pop, i, config.w, rng)
                candidate = crossover(pop.agents[i], mutant, config.cr, rng)
                survivor, f = select(pop.agents[i], candidate, fitness)
                pop.agents[i] = survivor
                pop.fitness[i] = f
                pop.observe(survivor, f)
                for value in (*mutant.as_tuple(), *candidate.as_tuple()):
                    assert 0.0 <= value <= 1.0


@pytest.mark.acceptance(6, "optimizer mechanics: monotone, bounded, guarded")
def test_minimum_population_size_enforced():
    with pytest.raises(ValueError):
        DEConfig(m=2)
    DEConfig(m=3)


@pytest.mark.acceptance(6, "optimizer mechanics: monotone, bounded, guarded")
def test_destructive_interference_not_faster(headline_batches, destructive_records):
    est = speedup_with_ci(
        headline_batches["classical"],
        destructive_records,
        batch_seed(MASTER, "acceptance|speedup|delta-pi"),
    )
    assert est.ci95[1] < 0.0  # significantly slower, hence not faster


# -- 7: composed multi-bit banks ----------------------------------------------


AND2 = NBitTrainingSet.from_function(2, lambda x: int(x == "11"))


def bank_config(machine, phases):
    return tuned_config(machine, phases, epsilon_t=0.005)


@pytest.mark.acceptance(7, "all 16 two-bit functions assemble to F >= 0.99")
def test_every_two_bit_function_reaches_target():
    for code in range(16):
        targets = NBitTrainingSet.from_function(
            2, lambda x, code=code: (code >> int(x, 2)) & 1
        )
        result = train_all(
            targets,
            bank_config(*SETTINGS["classical"]),
            batch_seed(MASTER, f"acceptance|bank|{code}"),
        )
        assert not result.bank.partial, f"function {code:04b}: {result.bank.failed_blocks}"
        fidelity = assembled_fidelity(result.bank, targets, Machine.CLASSICAL)
        assert fidelity >= 0.99, f"function {code:04b}: F={fidelity}"


@pytest.mark.acceptance(7, "all 16 two-bit functions assemble to F >= 0.99")
def test_quantum_bank_trains_faster_over_paired_seeds():
    diffs = []
    for s in range(100):
        seed = derive_seed(batch_seed(MASTER, "acceptance|bank-paired"), s)
        quantum = train_all(AND2, bank_config(*SETTINGS["delta0"]), seed)
        classical = train_all(AND2, bank_config(*SETTINGS["classical"]), seed)
        diffs.append(quantum.total_iterations - classical.total_iterations)
    diffs = np.asarray(diffs, dtype=float)
    rng = derive_rng(batch_seed(MASTER, "acceptance|bank-bootstrap"))
    means = rng.choice(diffs, size=(4000, diffs.size), replace=True).mean(axis=1)
    assert float(np.quantile(means, 0.95)) < 0.0


# -- 8: sweep protocol ---------------------------------------------------------


@pytest.mark.acceptance(8, "classical sweep fixes the headline (W, C_r) cell")
def test_sweep_covers_full_ranges(classical_sweep_grid):
    grid = classical_sweep_grid
    assert grid.w_values[0] == 0.0 and grid.w_values[-1] == 2.0
    assert grid.cr_values[0] == 0.0 and grid.cr_values[-1] == 1.0
    assert len(grid.w_values) == 21 and len(grid.cr_values) == 21


@pytest.mark.acceptance(8, "classical sweep fixes the headline (W, C_r) cell")
def test_best_cell_is_frozen_tuning(classical_sweep_grid):
    grid = classical_sweep_grid
    assert grid.best_cell == (TUNED_W, TUNED_CR)
    i, j = grid.best_indices()
    assert int(grid.fail_grid[i, j]) == 0


@pytest.mark.acceptance(8, "classical sweep fixes the headline (W, C_r) cell")
def test_headline_runs_on_the_swept_cell():
    config = tuned_config(*SETTINGS["classical"])
    assert (config.w, config.cr) == (TUNED_W, TUNED_CR)


# -- 9: byte-identical reruns ---------------------------------------------------


def _run_twice(tmp_path, argv, names):
    outputs = []
    for label in ("a", "b"):
        out = tmp_path / f"{argv[0]}-{label}"
        assert main([*argv, "--seed", "7", "--workers", "1", "--out", str(out)]) == 0
        outputs.append(out)
    first, second = outputs
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    a = json.loads((first / "summary.json").read_text())
    b = json.loads((second / "summary.json").read_text())
    a.pop("generated_at")
    b.pop("generated_at")
    assert a == b


@pytest.mark.acceptance(9, "same seed reproduces every data file byte for byte")
def test_learning_outputs_reproducible(tmp_path, capsys):
    _run_twice(
        tmp_path,
        ["learn", "--trials", "20", "--settings", "classical,delta0"],
        [
            "classical-records.jsonl",
            "classical-curve.csv",
            "delta0-records.jsonl",
            "delta0-curve.csv",
        ],
    )
    capsys.readouterr()


@pytest.mark.acceptance(9, "same seed reproduces every data file byte for byte")
def test_decoherence_outputs_reproducible(tmp_path, capsys):
    _run_twice(
        tmp_path,
        ["decohere", "--trials", "10", "--gammas", "0,0.5,1"],
        [
            "classical-records.jsonl",
            "decoherence.csv",
            "gamma-0-records.jsonl",
            "gamma-0.5-records.jsonl",
            "gamma-1-records.jsonl",
        ],
    )
    capsys.readouterr()


@pytest.mark.acceptance(9, "same seed reproduces every data file byte for byte")
def test_sweep_and_bank_outputs_reproducible(tmp_path, capsys):
    payload = {
        "sweep": {
            "settings": ["classical"],
            "w_grid": [0.6, 0.8],
            "cr_grid": [0.85, 0.95],
            "trials_per_cell": 8,
        }
    }
    config = tmp_path / "config.json"
    config.write_text(json.dumps(payload), encoding="utf-8")
    _run_twice(
        tmp_path, ["sweep", "--config", str(config)], ["classical-sweep.csv"]
    )
    _run_twice(
        tmp_path,
        ["nbit", "--n-bits", "2", "--function", "xor"],
        ["bank.json", "report.csv"],
    )
    capsys.readouterr()


@pytest.mark.acceptance(9, "same seed reproduces every data file byte for byte")
def test_worker_count_never_changes_results(tmp_path, capsys):
    outputs = []
    for label, workers in (("serial", "1"), ("pooled", "2")):
        out = tmp_path / label
        assert main(["learn", "--trials", "12", "--settings", "delta0",
                     "--seed", "7", "--workers", workers, "--out", str(out)]) == 0
        outputs.append(out)
    capsys.readouterr()
    first, second = outputs
    for name in ("delta0-records.jsonl", "delta0-curve.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()

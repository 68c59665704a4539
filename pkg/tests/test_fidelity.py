import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from usfc.fidelity import (
    CanonicalTask,
    TaskSpec,
    advantage_amplitude,
    analytic_advantage,
    canonical_task,
    circuit_fidelity,
    dephased_advantage,
    fidelity_gap,
    fidelity_gap_batch,
    task_fidelity,
)
from usfc.model import Machine, PhaseConfig, PreferenceVector, output_distribution

probabilities = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


class TestCanonicalTasks:
    def test_t1_constant_zero(self):
        assert canonical_task(CanonicalTask.T1).table == {"0": (1.0, 0.0), "1": (1.0, 0.0)}

    def test_t2_identity(self):
        assert canonical_task(CanonicalTask.T2).table == {"0": (1.0, 0.0), "1": (0.0, 1.0)}

    def test_t3_constant_one(self):
        assert canonical_task(CanonicalTask.T3).table == {"0": (0.0, 1.0), "1": (0.0, 1.0)}

    def test_t4_negation(self):
        assert canonical_task(CanonicalTask.T4).table == {"0": (0.0, 1.0), "1": (1.0, 0.0)}

    def test_all_deterministic(self):
        for t in CanonicalTask:
            assert canonical_task(t).is_deterministic()

    def test_target_bits(self):
        t4 = canonical_task(CanonicalTask.T4)
        assert (t4.target_bit("0"), t4.target_bit("1")) == (1, 0)


class TestTaskSpec:
    def test_json_round_trip(self):
        spec = TaskSpec(2, {"00": (1, 0), "01": (0, 1), "10": (0.5, 0.5), "11": (1, 0)})
        again = TaskSpec.from_json(spec.to_json())
        assert again == spec
        payload = json.loads(spec.to_json())
        assert payload["n_bits"] == 2 and payload["rows"]["10"] == [0.5, 0.5]

    def test_rejects_wrong_row_count(self):
        with pytest.raises(ValueError):
            TaskSpec(2, {"00": (1, 0), "01": (0, 1)})

    def test_rejects_unnormalized_row(self):
        with pytest.raises(ValueError):
            TaskSpec(1, {"0": (0.6, 0.6), "1": (1, 0)})

    def test_rejects_bad_key(self):
        with pytest.raises(ValueError):
            TaskSpec(1, {"0": (1, 0), "2": (1, 0)})


class TestTaskFidelity:
    def test_perfect_match_is_one(self):
        task = canonical_task(CanonicalTask.T2)
        assert task_fidelity({"0": [1.0, 0.0], "1": [0.0, 1.0]}, task) == 1.0

    def test_quarter_rows_give_half(self):
        task = canonical_task(CanonicalTask.T1)
        f = task_fidelity({"0": [0.25, 0.75], "1": [0.25, 0.75]}, task)
        assert f == pytest.approx((0.25 * 0.25) ** 0.25, abs=1e-15)
        assert f == pytest.approx(0.5, abs=1e-15)

    def test_classical_even_preferences(self):
        pref = PreferenceVector(0.5, 0.5)
        dist = {
            "0": output_distribution(Machine.CLASSICAL, pref, PhaseConfig.zero(), 0.0, 0),
            "1": output_distribution(Machine.CLASSICAL, pref, PhaseConfig.zero(), 0.0, 1),
        }
        f = task_fidelity(dist, canonical_task(CanonicalTask.T1))
        assert f**4 == pytest.approx(0.25, abs=1e-12)

    def test_key_mismatch_rejected(self):
        with pytest.raises(ValueError):
            task_fidelity({"00": [1, 0]}, canonical_task(CanonicalTask.T1))

    @given(
        rows=st.lists(probabilities, min_size=2, max_size=2),
        task_id=st.sampled_from(list(CanonicalTask)),
    )
    def test_bounds(self, rows, task_id):
        dist = {"0": [rows[0], 1 - rows[0]], "1": [rows[1], 1 - rows[1]]}
        f = task_fidelity(dist, canonical_task(task_id))
        assert 0.0 <= f <= 1.0 + 1e-15

    @given(rows=st.lists(probabilities, min_size=2, max_size=2))
    def test_unity_implies_exact_match(self, rows):
        task = canonical_task(CanonicalTask.T1)
        dist = {"0": [rows[0], 1 - rows[0]], "1": [rows[1], 1 - rows[1]]}
        if task_fidelity(dist, task) > 1.0 - 1e-12:
            assert rows[0] > 1.0 - 1e-10 and rows[1] > 1.0 - 1e-10


class TestAdvantageIdentity:
    def test_headline_point(self):
        lam, gap = analytic_advantage(PreferenceVector(0.5, 0.5), 0.0)
        assert lam == pytest.approx(0.25, abs=1e-15)
        assert gap == pytest.approx(0.25, abs=1e-15)
        numeric = fidelity_gap(PreferenceVector(0.5, 0.5), PhaseConfig.zero(), 0.0, canonical_task(CanonicalTask.T1))
        assert numeric == pytest.approx(0.25, abs=1e-12)

    def test_orthogonal_phase_kills_gap(self):
        for p0, p1 in [(0.3, 0.8), (0.9, 0.2), (0.5, 0.5)]:
            _, gap = analytic_advantage(PreferenceVector(p0, p1), math.pi / 2)
            assert abs(gap) < 1e-15
            numeric = fidelity_gap(
                PreferenceVector(p0, p1), PhaseConfig.half_pi(), 0.0, canonical_task(CanonicalTask.T1)
            )
            assert abs(numeric) < 1e-12

    @pytest.mark.parametrize("pref", [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0)])
    def test_endpoint_preferences_have_no_advantage(self, pref):
        assert advantage_amplitude(PreferenceVector(*pref)) == 0.0

    def test_identity_on_random_parameters(self):
        # 10^4 random (p0, p1, delta): closed form vs numeric gap below 1e-10
        rng = np.random.default_rng(414213562)
        task = canonical_task(CanonicalTask.T1)
        worst = 0.0
        for p0, p1, u in rng.random((10_000, 3)):
            delta = 2.0 * math.pi * u - math.pi
            pref = PreferenceVector(p0, p1)
            lam, gap = analytic_advantage(pref, delta)
            numeric = fidelity_gap(pref, PhaseConfig.from_delta(delta), 0.0, task)
            worst = max(worst, abs(numeric - gap))
        assert worst < 1e-10

    def test_monotone_damage(self):
        pref = PreferenceVector(0.5, 0.5)
        task = canonical_task(CanonicalTask.T1)
        lam = advantage_amplitude(pref)
        previous = math.inf
        for gamma in np.linspace(0.0, 1.0, 26):
            numeric = fidelity_gap(pref, PhaseConfig.zero(), gamma, task)
            assert numeric == pytest.approx(dephased_advantage(lam, gamma), abs=1e-10)
            assert numeric <= previous + 1e-12
            previous = numeric

    def test_dephased_advantage_values(self):
        assert dephased_advantage(0.25, 0.0) == 0.25
        assert dephased_advantage(0.25, 1.0) == 0.0
        assert dephased_advantage(0.25, 0.4) == pytest.approx(0.15, abs=1e-15)
        numeric = fidelity_gap(PreferenceVector(0.5, 0.5), PhaseConfig.zero(), 0.4, canonical_task(CanonicalTask.T1))
        assert numeric == pytest.approx(0.15, abs=1e-12)

    def test_dephased_advantage_domain(self):
        with pytest.raises(ValueError):
            dephased_advantage(0.25, -0.1)
        with pytest.raises(ValueError):
            dephased_advantage(0.25, 1.1)


class TestFidelityGapBatch:
    def test_matches_scalar_path(self):
        rng = np.random.default_rng(161803398)
        task = canonical_task(CanonicalTask.T1)
        draws = rng.random((200, 4))
        deltas = 2.0 * math.pi * draws[:, 2] - math.pi
        for gamma_col in (None, 3):
            gamma = 0.0 if gamma_col is None else float(draws[0, 3])
            gaps = fidelity_gap_batch(draws[:, 0], draws[:, 1], deltas, gamma)
            for k in range(draws.shape[0]):
                scalar = fidelity_gap(
                    PreferenceVector(draws[k, 0], draws[k, 1]),
                    PhaseConfig.from_delta(deltas[k]),
                    gamma,
                    task,
                )
                assert gaps[k] == pytest.approx(scalar, abs=1e-14)

    def test_broadcasts_scalars(self):
        gap = fidelity_gap_batch(0.5, 0.5, 0.0)
        assert gap.shape == ()
        assert float(gap) == pytest.approx(0.25, abs=1e-12)

    def test_grid_shapes(self):
        p0 = np.linspace(0.0, 1.0, 7)[:, None]
        p1 = np.linspace(0.0, 1.0, 5)[None, :]
        gaps = fidelity_gap_batch(p0, p1, math.pi / 2)
        assert gaps.shape == (7, 5)
        assert np.max(np.abs(gaps)) < 1e-12

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            fidelity_gap_batch([0.5, 1.2], [0.5, 0.5], [0.0, 0.0])
        with pytest.raises(ValueError):
            fidelity_gap_batch(0.5, 0.5, 0.0, gamma=-0.2)


class TestOtherTaskGaps:
    """The remaining single-bit tasks show the same interference structure.

    Numerically: T2's gap is -Lambda cos(delta); T3 and T4 carry the reflected
    amplitude Lambda(1-p0, p1) with opposite signs.  These are checked, not
    assumed, because only the constant-0 formula is exposed analytically.
    """

    @given(p0=st.floats(0.01, 0.99), p1=st.floats(0.01, 0.99))
    def test_t2_gap_is_negated_t1(self, p0, p1):
        pref = PreferenceVector(p0, p1)
        lam = advantage_amplitude(pref)
        for delta in (0.0, math.pi / 3, math.pi):
            gap = fidelity_gap(pref, PhaseConfig.from_delta(delta), 0.0, canonical_task(CanonicalTask.T2))
            assert gap == pytest.approx(-lam * math.cos(delta), abs=1e-10)

    @given(p0=st.floats(0.01, 0.99), p1=st.floats(0.01, 0.99))
    def test_t3_t4_carry_reflected_amplitude(self, p0, p1):
        pref = PreferenceVector(p0, p1)
        reflected = advantage_amplitude(PreferenceVector(1.0 - p0, p1))
        for delta in (0.0, math.pi / 3, math.pi):
            gap3 = fidelity_gap(pref, PhaseConfig.from_delta(delta), 0.0, canonical_task(CanonicalTask.T3))
            gap4 = fidelity_gap(pref, PhaseConfig.from_delta(delta), 0.0, canonical_task(CanonicalTask.T4))
            assert gap3 == pytest.approx(-reflected * math.cos(delta), abs=1e-10)
            assert gap4 == pytest.approx(reflected * math.cos(delta), abs=1e-10)

    def test_optimal_gap_magnitude_matches_amplitude(self):
        rng = np.random.default_rng(7182818)
        for p0, p1 in rng.random((50, 2)):
            pref = PreferenceVector(p0, p1)
            lam = advantage_amplitude(pref)
            best = max(
                abs(fidelity_gap(pref, PhaseConfig.from_delta(d), 0.0, canonical_task(CanonicalTask.T2)))
                for d in (0.0, math.pi)
            )
            assert best == pytest.approx(lam, abs=1e-10)


class TestCircuitFidelity:
    def test_deterministic_preferences_solve_t2(self):
        task = canonical_task(CanonicalTask.T2)
        solved = circuit_fidelity(Machine.CLASSICAL, PreferenceVector(1.0, 0.0), PhaseConfig.zero(), 0.0, task)
        assert solved == pytest.approx(1.0, abs=1e-15)
        # keeping both gates at identity outputs 0 for x=1, orthogonal to y=x
        stuck = circuit_fidelity(Machine.CLASSICAL, PreferenceVector(1.0, 1.0), PhaseConfig.zero(), 0.0, task)
        assert stuck == pytest.approx(0.0, abs=1e-15)

    def test_quantum_beats_classical_at_zero_delta(self):
        pref = PreferenceVector(0.5, 0.5)
        task = canonical_task(CanonicalTask.T1)
        fq = circuit_fidelity(Machine.QUANTUM, pref, PhaseConfig.zero(), 0.0, task)
        fc = circuit_fidelity(Machine.CLASSICAL, pref, PhaseConfig.zero(), 0.0, task)
        assert fq > fc

    def test_rejects_multibit_task(self):
        spec = TaskSpec(2, {"00": (1, 0), "01": (1, 0), "10": (1, 0), "11": (1, 0)})
        with pytest.raises(ValueError):
            circuit_fidelity(Machine.CLASSICAL, PreferenceVector(1, 1), PhaseConfig.zero(), 0.0, spec)

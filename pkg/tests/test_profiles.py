"""Profile estimation tests.

Expected values are frozen from small independent oracles implemented inline
(sort-and-index for quantiles, loop counting for admission), not from the
code under test.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sjasim import profiles as pf


def oracle_quantile(values, q):
    """ceil(q*n)-th order statistic by explicit sort-and-index."""
    s = sorted(values)
    rank = max(1, math.ceil(q * len(s)))
    return s[rank - 1]


def oracle_joint(runs, lo, hi, capacity):
    """Fraction of runs whose max over grid columns [lo, hi] is <= capacity."""
    ok = 0
    for run in runs:
        seg = run[lo : hi + 1]
        if len(seg) == 0 or max(seg) <= capacity:
            ok += 1
    return ok / len(runs)


def make_ensemble(runs, grid_step=60.0):
    return pf.TrajectoryEnsemble(grid_step=grid_step, runs=[np.asarray(r, float) for r in runs])


class TestQuantileEnvelope:
    def test_nearest_rank_hundred_values(self):
        # 100 runs whose value at t=0 is 1..100; eps=0.25 -> 75th order stat.
        runs = [[float(v)] for v in range(1, 101)]
        prof = pf.build_profile(make_ensemble(runs), eps_levels=(0.25,))
        assert prof.envelope(0.25)[0] == 75.0
        assert oracle_quantile(range(1, 101), 0.75) == 75

    def test_median_is_50th_percentile(self):
        runs = [[float(v)] for v in (5, 1, 9, 3, 7)]
        prof = pf.build_profile(make_ensemble(runs))
        assert prof.median_curve[0] == oracle_quantile([5, 1, 9, 3, 7], 0.5) == 5.0

    def test_short_runs_do_not_contribute(self):
        # At t=1 only the two long runs are alive; support records that.
        runs = [[1.0], [1.0, 10.0], [1.0, 20.0]]
        prof = pf.build_profile(make_ensemble(runs), eps_levels=(0.5,))
        assert list(prof.support) == [3, 2]
        assert prof.envelope(0.5)[1] == oracle_quantile([10.0, 20.0], 0.5)

    def test_monotone_in_eps(self):
        rng = np.random.default_rng(7)
        runs = [rng.uniform(0, 100, size=rng.integers(3, 40)) for _ in range(30)]
        prof = pf.build_profile(make_ensemble(runs), eps_levels=(0.01, 0.1, 0.5))
        u_tight = prof.envelope(0.01)
        u_mid = prof.envelope(0.1)
        u_med = prof.envelope(0.5)
        assert np.all(u_tight >= u_mid) and np.all(u_mid >= u_med)
        assert np.all(prof.median_curve <= u_mid)
        assert np.all(u_tight >= 0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        runs = [rng.uniform(0, 50, size=rng.integers(2, 20)) for _ in range(12)]
        a = pf.build_profile(make_ensemble(runs), eps_levels=(0.2,))
        order = rng.permutation(len(runs))
        b = pf.build_profile(make_ensemble([runs[i] for i in order]), eps_levels=(0.2,))
        np.testing.assert_array_equal(a.envelope(0.2), b.envelope(0.2))
        np.testing.assert_array_equal(a.median_curve, b.median_curve)
        np.testing.assert_array_equal(a.runtime_samples, b.runtime_samples)

    def test_duplicating_every_run_leaves_quantiles_unchanged(self):
        rng = np.random.default_rng(11)
        runs = [rng.uniform(0, 50, size=rng.integers(2, 15)) for _ in range(9)]
        a = pf.build_profile(make_ensemble(runs), eps_levels=(0.1, 0.37))
        b = pf.build_profile(make_ensemble(runs + runs), eps_levels=(0.1, 0.37))
        for eps in (0.1, 0.37):
            np.testing.assert_array_equal(a.envelope(eps), b.envelope(eps))
        np.testing.assert_array_equal(a.median_curve, b.median_curve)

    @given(
        st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=60),
        st.floats(0.01, 0.99),
    )
    @settings(max_examples=150, deadline=None)
    def test_nearest_rank_matches_oracle(self, values, q):
        arr = np.sort(np.asarray(values))
        assert pf.nearest_rank(arr, q, len(arr)) == oracle_quantile(values, q)

    def test_rejects_single_run_and_empty(self):
        with pytest.raises(pf.ProfileError):
            pf.build_profile(make_ensemble([[1.0, 2.0]]))
        with pytest.raises(pf.ProfileError):
            make_ensemble([])

    def test_single_run_fallback_inflates(self):
        prof = pf.single_run_profile(np.array([100.0, 200.0]), 60.0, inflation=1.10)
        np.testing.assert_allclose(prof.envelope(0.05), [110.0, 220.0])
        np.testing.assert_array_equal(prof.median_curve, [100.0, 200.0])
        assert prof.horizon == 60.0


def step_profile(grid_step=60.0, low=4096.0, high=18432.0, n_runs=4):
    """All runs identical: low for the first 10 minutes, high for the next 10."""
    steps = int(600 / grid_step)
    run = np.concatenate([np.full(steps, low), np.full(steps, high)])
    return pf.build_profile(make_ensemble([run] * n_runs, grid_step), eps_levels=(0.05,))


class TestEnvelopePeak:
    def test_step_curve_windows(self):
        prof = step_profile()
        assert pf.envelope_peak(prof, 0.05, (0.0, 540.0)).value_mb == 4096.0
        assert pf.envelope_peak(prof, 0.05, (0.0, 1140.0)).value_mb == 18432.0
        # Endpoints snap outward: reaching past a boundary picks up the step.
        assert pf.envelope_peak(prof, 0.05, (0.0, 541.0)).value_mb == 4096.0
        assert pf.envelope_peak(prof, 0.05, (0.0, 601.0)).value_mb == 18432.0

    def test_window_past_horizon_clamps_and_flags(self):
        prof = step_profile()
        peak = pf.envelope_peak(prof, 0.05, (0.0, 99999.0))
        assert peak.truncated and peak.value_mb == 18432.0
        assert not pf.envelope_peak(prof, 0.05, (0.0, 600.0)).truncated


class TestMemoryAdmissible:
    def test_joint_counting_oracle_frozen(self):
        # 93 runs stay at 10, 7 spike to 50 inside the window: prob 0.93.
        runs = [[10.0, 10.0, 10.0] for _ in range(93)] + [[10.0, 50.0, 10.0] for _ in range(7)]
        prof = pf.build_profile(make_ensemble(runs), eps_levels=(0.05,))
        d = pf.memory_admissible(prof, 40.0, (0.0, 120.0), eps=0.05, method="joint")
        assert d.probability == 0.93 and not d.admissible
        d10 = pf.memory_admissible(prof, 40.0, (0.0, 120.0), eps=0.10, method="joint")
        assert d10.admissible
        assert oracle_joint([np.asarray(r) for r in runs], 0, 2, 40.0) == 0.93

    def test_finished_runs_count_as_success(self):
        runs = [[10.0], [10.0, 99.0]]
        prof = pf.build_profile(make_ensemble(runs), eps_levels=(0.4,))
        d = pf.memory_admissible(prof, 50.0, (60.0, 60.0), eps=0.4, method="joint")
        assert d.probability == 0.5

    def test_joint_matches_oracle_randomized(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(2, 40))
            runs = [rng.uniform(0, 100, size=rng.integers(1, 25)) for _ in range(n)]
            prof = pf.build_profile(make_ensemble(runs, 30.0), eps_levels=(0.1,))
            max_len = max(len(r) for r in runs)
            lo = int(rng.integers(0, max_len))
            hi = int(rng.integers(lo, max_len))
            cap = float(rng.uniform(0, 110))
            d = pf.memory_admissible(prof, cap, (lo * 30.0, hi * 30.0), eps=0.1)
            assert d.probability == pytest.approx(oracle_joint(runs, lo, hi, cap), abs=0)

    def test_envelope_method_admits_what_joint_rejects(self):
        # Each run spikes at a distinct time: pointwise quantiles never see
        # the spikes, but every run exceeds the capacity somewhere.
        n, length = 100, 100
        runs = []
        for i in range(n):
            r = np.full(length, 1000.0)
            r[i] = 11000.0
            runs.append(r)
        prof = pf.build_profile(make_ensemble(runs), eps_levels=(0.05,))
        window = (0.0, (length - 1) * 60.0)
        env = pf.memory_admissible(prof, 10240.0, window, 0.05, method="envelope")
        joint = pf.memory_admissible(prof, 10240.0, window, 0.05, method="joint")
        assert env.admissible and not joint.admissible
        assert joint.probability == 0.0
        # Pointwise the guarantee does hold, which is what envelope reports.
        assert env.probability == 0.99


class TestDeadlineAdmissible:
    def test_counting_oracle_frozen(self):
        # 93 of 100 scaled samples inside the deadline: prob 0.93.
        durations = [100.0] * 93 + [1000.0] * 7
        runs = [np.zeros(int(d / 10.0) + 1) for d in durations]
        prof = pf.build_profile(make_ensemble(runs, 10.0))
        d = pf.deadline_admissible(prof, 1.0, 100.0, alpha_t=0.05)
        assert d.probability == 0.93 and not d.admissible
        assert pf.deadline_admissible(prof, 1.0, 100.0, alpha_t=0.10).admissible

    def test_scaling_by_remaining_fraction(self):
        runs = [np.zeros(11), np.zeros(21)]  # durations 100 and 200 at step 10
        prof = pf.build_profile(make_ensemble(runs, 10.0))
        assert pf.deadline_admissible(prof, 0.5, 60.0, 0.4).probability == 0.5
        assert pf.deadline_admissible(prof, 0.5, 100.0, 0.4).probability == 1.0

    def test_nonpositive_deadline(self):
        runs = [np.zeros(3), np.zeros(5)]
        prof = pf.build_profile(make_ensemble(runs, 10.0))
        assert not pf.deadline_admissible(prof, 1.0, -5.0, 0.05).admissible
        assert pf.deadline_admissible(prof, 0.0, 0.0, 0.05).admissible


class TestContinuation:
    def test_single_neighbor_returns_its_suffix(self):
        a = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        b = np.array([10.0, 20.0, 30.0, 40.0])
        prof = pf.build_profile(make_ensemble([a, b], 10.0))
        c = pf.predict_continuation(prof, np.array([1.0, 2.0]), k=1)
        assert c.neighbor_indices == (0,)
        np.testing.assert_array_equal(c.median, [3.0, 4.0, 5.0])
        assert c.start_index == 2

    def test_band_spans_quartiles(self):
        runs = [np.array([0.0, v]) for v in (10.0, 20.0, 30.0, 40.0)]
        prof = pf.build_profile(make_ensemble(runs, 10.0))
        c = pf.predict_continuation(prof, np.array([0.0]), k=4)
        assert c.band_low[0] == oracle_quantile([10, 20, 30, 40], 0.25) == 10.0
        assert c.median[0] == oracle_quantile([10, 20, 30, 40], 0.5) == 20.0
        assert c.band_high[0] == oracle_quantile([10, 20, 30, 40], 0.75) == 30.0

    def test_prefix_longer_than_all_runs_is_empty(self):
        runs = [np.array([1.0, 2.0]), np.array([3.0, 4.0])]
        prof = pf.build_profile(make_ensemble(runs, 10.0))
        c = pf.predict_continuation(prof, np.zeros(5), k=2)
        assert c.empty

    def test_k_bounds(self):
        prof = pf.build_profile(make_ensemble([[1.0], [2.0]], 10.0))
        with pytest.raises(pf.ProfileError):
            pf.predict_continuation(prof, np.array([1.0]), k=0)
        with pytest.raises(pf.ProfileError):
            pf.predict_continuation(prof, np.array([1.0]), k=3)


class TestRefresh:
    def test_adding_tenth_value_keeps_ninth_rank(self):
        runs = [[float(v)] for v in range(1, 10)]
        prof = pf.build_profile(make_ensemble(runs), eps_levels=(0.1,))
        assert prof.envelope(0.1)[0] == 9.0  # ceil(0.9*9)=9th of 1..9
        refreshed = pf.refresh_profile(prof, np.array([10.0]))
        assert refreshed.envelope(0.1)[0] == 9.0  # ceil(0.9*10)=9th of 1..10
        assert refreshed.source.n_runs == 10

    def test_refresh_extends_horizon(self):
        prof = pf.build_profile(make_ensemble([[1.0], [2.0]], 30.0))
        refreshed = pf.refresh_profile(prof, np.array([1.0, 2.0, 3.0]))
        assert refreshed.horizon == 60.0
        assert len(refreshed.runtime_samples) == 3


class TestTrajectoryFiles:
    def test_round_trip_six_significant_digits(self, tmp_path):
        rng = np.random.default_rng(0)
        samples = rng.uniform(0, 40960, size=50)
        path = tmp_path / "run.csv"
        pf.write_trajectory(path, samples, 60.0)
        first = path.read_bytes()
        values, step = pf.read_trajectory(path)
        assert step == 60.0
        pf.write_trajectory(path, values, step)
        assert path.read_bytes() == first
        np.testing.assert_allclose(values, samples, rtol=1e-5)

    def test_header_required(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("0,1\n60,2\n")
        with pytest.raises(pf.ProfileError):
            pf.read_trajectory(p)

    def test_non_uniform_grid_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time_s,mem_mb\n0,1\n60,2\n150,3\n")
        with pytest.raises(pf.ProfileError):
            pf.read_trajectory(p)

    def test_manifest_round_trip(self, tmp_path):
        ens = make_ensemble([[1.0, 2.0], [3.0, 4.0, 5.0]], 30.0)
        manifest = pf.write_ensemble(tmp_path / "ens", ens)
        loaded = pf.load_ensemble(manifest)
        assert loaded.grid_step == 30.0
        assert loaded.n_runs == 2
        np.testing.assert_array_equal(loaded.runs[1], [3.0, 4.0, 5.0])

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(pf.ProfileError):
            pf.load_ensemble(tmp_path / "nope.txt")

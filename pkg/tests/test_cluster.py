"""Slice timeline tests.

Free-interval expectations come from a brute-force occupancy scan over a
fine grid, not from the timeline code itself.
"""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sjasim.cluster import (
    ClusterState,
    ExecutionWindow,
    ReservationConflict,
    ReservationNotFound,
    SliceCatalog,
    SliceInstance,
    find_gaps,
    release_tail,
    reserve,
)


def oracle_free(reservations, start, end, step=0.25):
    """Maximal free intervals by scanning occupancy on a fine grid."""
    ticks = []
    t = start
    while t < end - 1e-12:
        busy = any(s <= t < e for s, e in reservations)
        ticks.append((t, busy))
        t += step
    gaps = []
    run_start = None
    for t, busy in ticks:
        if not busy and run_start is None:
            run_start = t
        elif busy and run_start is not None:
            gaps.append((run_start, t))
            run_start = None
    if run_start is not None:
        gaps.append((run_start, end))
    return gaps


class TestCatalog:
    def test_smallest_covering_walks_up(self):
        cat = SliceCatalog((5120, 10240, 20480, 40960))
        assert cat.smallest_covering(1.0) == 5120
        assert cat.smallest_covering(5120.0) == 5120
        assert cat.smallest_covering(5121.0) == 10240
        assert cat.smallest_covering(40960.0) == 40960
        assert cat.smallest_covering(40961.0) is None

    def test_rejects_unsorted_or_duplicate(self):
        with pytest.raises(ValueError):
            SliceCatalog((10240, 5120))
        with pytest.raises(ValueError):
            SliceCatalog((5120, 5120))
        with pytest.raises(ValueError):
            SliceCatalog(())

    def test_membership(self):
        cat = SliceCatalog((5120, 20480))
        assert 5120 in cat and 20480 in cat and 10240 not in cat


class TestLayout:
    def test_ids_are_node_slice_ordinals(self):
        cluster = ClusterState.from_layout(2, (20480, 10240))
        assert [s.slice_id for s in cluster.slices()] == ["g0s0", "g0s1", "g1s0", "g1s1"]
        assert cluster.total_capacity_mb == 2 * (20480 + 10240)

    def test_slice_capacity_must_be_in_catalog(self):
        with pytest.raises(ValueError):
            ClusterState.from_layout(1, (999,))

    def test_slice_budget_enforced(self):
        with pytest.raises(ValueError):
            ClusterState.from_layout(1, (20480, 20480), gpu_capacity_mb=20480)
        ClusterState.from_layout(1, (20480, 20480), gpu_capacity_mb=40960)

    def test_at_most_seven_slices(self):
        ClusterState.from_layout(1, (5120,) * 7)
        with pytest.raises(ValueError):
            ClusterState.from_layout(1, (5120,) * 8)

    def test_unknown_slice_lookup(self):
        cluster = ClusterState.from_layout(1, (5120,))
        with pytest.raises(ReservationNotFound):
            cluster.slice("g9s9")


class TestReserve:
    def test_overlap_rejected_both_sides(self):
        s = SliceInstance("a", 10240)
        s.reserve(100.0, 200.0, "x")
        with pytest.raises(ReservationConflict):
            s.reserve(150.0, 250.0, "y")  # collides from the right
        with pytest.raises(ReservationConflict):
            s.reserve(50.0, 150.0, "y")  # collides from the left
        with pytest.raises(ReservationConflict):
            s.reserve(120.0, 130.0, "y")  # nested
        s.reserve(200.0, 300.0, "y")  # half-open: touching is fine
        s.reserve(0.0, 100.0, "z")

    def test_empty_interval_rejected(self):
        s = SliceInstance("a", 10240)
        with pytest.raises(ReservationConflict):
            s.reserve(100.0, 100.0, "x")

    def test_kept_sorted_by_start(self):
        s = SliceInstance("a", 10240)
        for lo, hi in [(300.0, 400.0), (0.0, 50.0), (100.0, 200.0)]:
            s.reserve(lo, hi, "x")
        assert [r.start for r in s.reservations] == [0.0, 100.0, 300.0]


class TestFreeIntervals:
    def test_matches_scan_oracle(self):
        s = SliceInstance("a", 10240)
        res = [(10.0, 20.0), (30.0, 45.0), (60.0, 70.0)]
        for lo, hi in res:
            s.reserve(lo, hi, "x")
        got = s.free_intervals(0.0, 80.0)
        assert got == oracle_free(res, 0.0, 80.0)
        assert got == [(0.0, 10.0), (20.0, 30.0), (45.0, 60.0), (70.0, 80.0)]

    def test_window_clips_reservations(self):
        s = SliceInstance("a", 10240)
        s.reserve(0.0, 50.0, "x")
        s.reserve(90.0, 200.0, "y")
        assert s.free_intervals(40.0, 100.0) == [(50.0, 90.0)]

    def test_fully_free_and_fully_busy(self):
        s = SliceInstance("a", 10240)
        assert s.free_intervals(5.0, 15.0) == [(5.0, 15.0)]
        s.reserve(0.0, 20.0, "x")
        assert s.free_intervals(5.0, 15.0) == []

    def test_idle_everywhere_after(self):
        s = SliceInstance("a", 10240)
        s.reserve(0.0, 100.0, "x")
        assert not s.idle_everywhere_after(50.0)
        assert s.idle_everywhere_after(100.0)

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 38), st.integers(1, 10)), max_size=8))
    def test_random_timelines_match_oracle(self, spans):
        s = SliceInstance("a", 10240)
        placed = []
        for lo, width in spans:
            try:
                s.reserve(float(lo), float(lo + width), "x")
                placed.append((float(lo), float(lo + width)))
            except ReservationConflict:
                pass
        assert s.free_intervals(0.0, 50.0) == oracle_free(placed, 0.0, 50.0, step=0.5)


class TestFindGaps:
    def test_partitions_lookahead_range(self):
        cluster = ClusterState.from_layout(1, (20480, 10240))
        reserve(cluster, "g0s0", 0.0, 600.0, "a")
        reserve(cluster, "g0s0", 900.0, 1500.0, "b")
        reserve(cluster, "g0s1", 300.0, 2400.0, "c")
        horizon = 1800.0
        gaps = find_gaps(cluster, 0.0, horizon)
        for s in cluster.slices():
            mine = [g for g in gaps if g.slice_id == s.slice_id]
            covered = sum(g.duration for g in mine)
            busy = sum(
                min(r.end, horizon) - max(r.start, 0.0)
                for r in s.reservations
                if r.start < horizon and r.end > 0.0
            )
            assert covered + busy == pytest.approx(horizon)

    def test_min_duration_filters(self):
        cluster = ClusterState.from_layout(1, (20480,))
        reserve(cluster, "g0s0", 200.0, 1000.0, "a")
        gaps = find_gaps(cluster, 0.0, 1800.0, min_duration=300.0)
        assert [(g.start, g.duration) for g in gaps] == [(1000.0, 800.0)]

    def test_zero_horizon(self):
        cluster = ClusterState.from_layout(1, (20480,))
        assert find_gaps(cluster, 0.0, 0.0) == []

    def test_window_end_property(self):
        w = ExecutionWindow("g0s0", 20480, 120.0, 480.0)
        assert w.end == 600.0


class TestReleaseTail:
    def test_truncates_live_reservation(self):
        cluster = ClusterState.from_layout(1, (20480,))
        reserve(cluster, "g0s0", 0.0, 1000.0, "u1")
        release_tail(cluster, "u1", 400.0)
        assert [(r.start, r.end) for r in cluster.slice("g0s0").reservations] == [(0.0, 400.0)]

    def test_removes_future_reservation(self):
        cluster = ClusterState.from_layout(1, (20480,))
        reserve(cluster, "g0s0", 500.0, 1000.0, "u1")
        release_tail(cluster, "u1", 200.0)
        assert cluster.slice("g0s0").reservations == []

    def test_unknown_owner_raises(self):
        cluster = ClusterState.from_layout(1, (20480,))
        reserve(cluster, "g0s0", 0.0, 100.0, "u1")
        with pytest.raises(ReservationNotFound):
            release_tail(cluster, "u2", 50.0)
        with pytest.raises(ReservationNotFound):
            release_tail(cluster, "u1", 100.0)  # already ended by then

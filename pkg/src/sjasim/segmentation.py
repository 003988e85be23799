"""Slack-minimizing window segmentation with hysteresis.

Given an upper memory envelope over an offered window, split the window into
contiguous fragments and assign each the smallest catalog capacity covering
its (smoothed) envelope. A split is only accepted when it reduces wasted
reservation (reserved capacity-time minus envelope area) by at least
`hysteresis_delta` relative to the parent fragment's reservation, which
keeps plans from chasing short-lived dips.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d

from .cluster import ExecutionWindow, SliceCatalog
from .profiles import RiskParams, memory_admissible
from .workload import JobRuntime

__all__ = [
    "InfeasiblePlan",
    "SegmentationConfig",
    "Fragment",
    "FragmentPlan",
    "PlanRefusal",
    "segment_window",
    "smooth_envelope",
    "plan_waste",
    "plan_segments",
]


class InfeasiblePlan(ValueError):
    """No fragment of the window fits the offered capacity."""


@dataclass(frozen=True)
class SegmentationConfig:
    """Knobs for window segmentation.

    tau_min/tau_max bound fragment durations (seconds); smoothing_window is
    the width of the sliding-maximum applied to the envelope before capacity
    selection; hysteresis_delta is the minimum relative waste reduction a
    split must achieve; eps selects which envelope drives segmentation.
    """

    tau_min_s: float = 300.0
    tau_max_s: float = 3600.0
    smoothing_window_s: float = 120.0
    hysteresis_delta: float = 0.15
    eps: float = 0.05

    def __post_init__(self) -> None:
        if self.tau_min_s <= 0 or self.tau_max_s < self.tau_min_s:
            raise ValueError("need 0 < tau_min <= tau_max")
        if self.smoothing_window_s < 0:
            raise ValueError("smoothing_window must be >= 0")
        if self.hysteresis_delta < 0:
            raise ValueError("hysteresis_delta must be >= 0")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")

    def min_steps(self, grid_step: float) -> int:
        return max(1, math.ceil(self.tau_min_s / grid_step - 1e-9))

    def max_steps(self, grid_step: float) -> int:
        return max(self.min_steps(grid_step), int(self.tau_max_s / grid_step + 1e-9))


@dataclass(frozen=True)
class Fragment:
    """Half-open sample range [start_idx, end_idx) at one assigned capacity."""

    start_idx: int
    end_idx: int
    capacity_mb: int

    @property
    def n_steps(self) -> int:
        return self.end_idx - self.start_idx


def smooth_envelope(envelope: np.ndarray, grid_step: float, smoothing_window_s: float) -> np.ndarray:
    """Centered sliding maximum of total width ~smoothing_window_s.

    Never below the raw envelope, so smoothing only ever adds safety margin.
    """
    half = int(round(smoothing_window_s / (2.0 * grid_step)))
    if half <= 0 or len(envelope) <= 1:
        return np.asarray(envelope, dtype=float)
    return maximum_filter1d(np.asarray(envelope, dtype=float), size=2 * half + 1, mode="nearest")


def plan_waste(fragments: list[Fragment], smoothed: np.ndarray) -> tuple[float, float]:
    """(reserved, waste) of a plan in MB*steps against the smoothed envelope."""
    reserved = 0.0
    area = 0.0
    for f in fragments:
        reserved += f.capacity_mb * f.n_steps
        area += float(smoothed[f.start_idx : f.end_idx].sum())
    return reserved, reserved - area


def _waste(smoothed: np.ndarray, prefix: np.ndarray, a: int, b: int, cap: float) -> float:
    return cap * (b - a) - (prefix[b] - prefix[a])


def segment_window(
    envelope: np.ndarray,
    grid_step: float,
    catalog: SliceCatalog,
    offered_capacity_mb: int,
    seg: SegmentationConfig,
) -> list[Fragment]:
    """Split a window's envelope into capacity-assigned fragments.

    `envelope` holds one sample per grid step of the window (half-open step
    semantics: sample i covers [i, i+1) grid steps). The returned fragments
    tile a prefix of the window contiguously; the prefix ends early only
    when the smoothed envelope exceeds the offered capacity (nothing behind
    that point is reachable, work being sequential) or when duration bounds
    make the tail untileable. Raises InfeasiblePlan when not even a tau_min
    prefix fits the offered capacity.
    """
    u = np.asarray(envelope, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise InfeasiblePlan("empty window envelope")
    if offered_capacity_mb not in catalog:
        raise InfeasiblePlan(f"offered capacity {offered_capacity_mb} not in catalog")
    smoothed = smooth_envelope(u, grid_step, seg.smoothing_window_s)
    tmin = seg.min_steps(grid_step)
    tmax = seg.max_steps(grid_step)

    # Feasible prefix: everything strictly before the first sample whose
    # covering capacity exceeds the offer.
    feasible = smoothed <= offered_capacity_mb
    n = int(np.argmin(feasible)) if not feasible.all() else len(u)
    if n < tmin:
        raise InfeasiblePlan("no tau_min prefix fits the offered capacity")

    covers = np.array([catalog.smallest_covering(v) for v in smoothed[:n]], dtype=int)
    prefix = np.concatenate([[0.0], np.cumsum(smoothed[:n])])

    def cover_of(a: int, b: int) -> int:
        c = catalog.smallest_covering(float(smoothed[a:b].max()))
        assert c is not None and c <= offered_capacity_mb
        return c

    def split(a: int, b: int) -> list[Fragment]:
        cap = cover_of(a, b)
        parent_reserved = cap * (b - a)
        parent_waste = _waste(smoothed, prefix, a, b, cap)
        best_gain, best_cut = -1.0, None
        level_change = covers[a + 1 : b] != covers[a : b - 1]
        for off in np.flatnonzero(level_change):
            i = a + 1 + int(off)
            if i - a < tmin or b - i < tmin:
                continue
            w = _waste(smoothed, prefix, a, i, cover_of(a, i)) + _waste(
                smoothed, prefix, i, b, cover_of(i, b)
            )
            gain = (parent_waste - w) / parent_reserved
            if gain > best_gain + 1e-12:
                best_gain, best_cut = gain, i
        if best_cut is not None and best_gain >= seg.hysteresis_delta - 1e-12:
            return split(a, best_cut) + split(best_cut, b)
        return [Fragment(a, b, cap)]

    fragments = split(0, n) if n >= tmin else []

    # Duration bounds: fragments longer than tau_max are cut; pieces must
    # stay >= tau_min. When a fragment cannot be tiled within the bounds the
    # plan is truncated there (coverage stays a contiguous prefix).
    bounded: list[Fragment] = []
    for f in fragments:
        if f.n_steps <= tmax:
            bounded.append(f)
            continue
        pieces = _chop(f.start_idx, f.end_idx, tmin, tmax)
        if pieces is None:
            # Keep the largest tileable prefix of this fragment, then stop.
            k = (f.n_steps // tmax) * tmax
            if k >= tmin:
                pieces = _chop(f.start_idx, f.start_idx + k, tmin, tmax)
            if pieces is None:
                break
            bounded.extend(Fragment(a, b, cover_of(a, b)) for a, b in pieces)
            break
        bounded.extend(Fragment(a, b, cover_of(a, b)) for a, b in pieces)
    fragments = bounded
    if not fragments:
        raise InfeasiblePlan("duration bounds leave no plannable prefix")

    # Merge stabilization: collapse adjacent pairs whose separation is not
    # worth hysteresis_delta (unless the merge would break tau_max).
    changed = True
    while changed and len(fragments) > 1:
        changed = False
        for i in range(len(fragments) - 1):
            left, right = fragments[i], fragments[i + 1]
            total = right.end_idx - left.start_idx
            if total > tmax:
                continue
            cap = cover_of(left.start_idx, right.end_idx)
            merged_waste = _waste(smoothed, prefix, left.start_idx, right.end_idx, cap)
            child_waste = _waste(
                smoothed, prefix, left.start_idx, left.end_idx, left.capacity_mb
            ) + _waste(smoothed, prefix, right.start_idx, right.end_idx, right.capacity_mb)
            gain = (merged_waste - child_waste) / (cap * total)
            if gain < seg.hysteresis_delta - 1e-12:
                fragments[i : i + 2] = [Fragment(left.start_idx, right.end_idx, cap)]
                changed = True
                break
    return fragments


def _chop(a: int, b: int, tmin: int, tmax: int) -> list[tuple[int, int]] | None:
    """Tile [a, b) into pieces each within [tmin, tmax], or None."""
    length = b - a
    if length < tmin:
        return None
    if length <= tmax:
        return [(a, b)]
    k = math.ceil(length / tmax)
    if k * tmin > length:
        return None
    base, extra = divmod(length, k)
    cuts = [a]
    for i in range(k):
        cuts.append(cuts[-1] + base + (1 if i < extra else 0))
    return [(cuts[i], cuts[i + 1]) for i in range(k)]


@dataclass(frozen=True)
class FragmentPlan:
    """One plannable subjob: wall window plus job-relative work positions."""

    wall_start_s: float
    duration_s: float
    capacity_mb: int
    pos_from_s: float
    pos_to_s: float
    predicted_peak_mb: float
    admission_probability: float
    admission_truncated: bool = False
    methods_disagree: bool = False


@dataclass(frozen=True)
class PlanRefusal:
    reason: str


def plan_segments(
    job: JobRuntime,
    window: ExecutionWindow,
    catalog: SliceCatalog,
    risk: RiskParams,
    seg: SegmentationConfig,
    online_correction: bool = True,
    admission_method: str = "joint",
    start_position_s: float | None = None,
) -> list[FragmentPlan] | PlanRefusal:
    """Map an offered window onto the job's remaining work and segment it.

    The job-relative interval starts at the job's current work position
    (or at start_position_s, when a caller pipelines grants beyond already
    planned subjobs) and runs for the window's duration. Fragments keep
    contiguous work positions; planning stops at the first fragment that
    fails admission at its assigned capacity (later work is unreachable
    anyway). Jobs flagged non-atomizable are refused so a conventional
    scheduler path can take them.
    """
    if not job.spec.atomizable:
        return PlanRefusal("non-atomizable job, conventional placement only")
    if window.duration + 1e-9 < seg.tau_min_s:
        return PlanRefusal("window shorter than tau_min")
    profile = job.profile
    h = profile.grid_step
    # Whole grid steps that fit inside the window; never round up, or the
    # plan would spill past the window into the next reservation.
    n_steps = int(window.duration / h + 1e-9)
    if n_steps < 1:
        return PlanRefusal("window shorter than one grid step")
    base_pos = job.position_s if start_position_s is None else start_position_s
    i0 = int(round(base_pos / h))
    curve = profile.envelope(seg.eps)
    u = curve[i0 : i0 + n_steps]
    if len(u) < n_steps:
        # Past the profile horizon: extrapolate the last supported value.
        pad = np.full(n_steps - len(u), curve[-1] if len(curve) else 0.0)
        u = np.concatenate([u, pad]) if len(u) else pad
    if online_correction and job.demand_floor is not None:
        floor = job.demand_floor[i0 : i0 + n_steps]
        if len(floor) < n_steps:
            floor = np.concatenate([floor, np.zeros(n_steps - len(floor))])
        u = np.maximum(u, floor)
    try:
        fragments = segment_window(u, h, catalog, window.capacity_mb, seg)
    except InfeasiblePlan as exc:
        return PlanRefusal(str(exc))

    plans: list[FragmentPlan] = []
    for f in fragments:
        pos_from = (i0 + f.start_idx) * h
        pos_to = (i0 + f.end_idx) * h
        peak = float(u[f.start_idx : f.end_idx].max())
        # Fragment samples are [start, end): query the inclusive grid window
        # [pos_from, pos_to - h] so admission sees exactly those samples.
        decision = memory_admissible(
            profile, f.capacity_mb, (pos_from, pos_to - h), risk.eps, admission_method
        )
        other = memory_admissible(
            profile,
            f.capacity_mb,
            (pos_from, pos_to - h),
            risk.eps,
            "envelope" if admission_method == "joint" else "joint",
        )
        if not decision.admissible:
            break
        plans.append(
            FragmentPlan(
                wall_start_s=window.start + f.start_idx * h,
                duration_s=f.n_steps * h,
                capacity_mb=f.capacity_mb,
                pos_from_s=pos_from,
                pos_to_s=pos_to,
                predicted_peak_mb=peak,
                admission_probability=decision.probability,
                admission_truncated=decision.truncated,
                methods_disagree=decision.admissible != other.admissible,
            )
        )
    if not plans:
        return PlanRefusal("no admissible fragment at the offered capacity")
    return plans

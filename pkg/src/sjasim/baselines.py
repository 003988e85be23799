"""Reference schedulers: monolithic placement, moldable sizing, preemption.

These run whole jobs on single slices. Monolithic placement needs a slice
whose capacity covers the user-declared peak, free for the job's full
estimated runtime (median of the profile's runtime samples). The moldable
variant fixes a capacity class at submission and scales runtime by that
class's speedup multiplier. The preempt-migrate variant may evict a
lower-priority running job, which then loses progress back to its last
periodic checkpoint and pays a state-transfer delay before resuming.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import ClusterState, SliceInstance
from .workload import JobRuntime

__all__ = [
    "FIRST_FIT",
    "BEST_FIT",
    "MOLDABLE",
    "PREEMPT_MIGRATE",
    "BASELINE_KINDS",
    "BaselineParams",
    "Placement",
    "estimated_runtime_s",
    "monolithic_place",
    "moldable_capacity",
    "transfer_delay_s",
    "checkpointed_progress_s",
    "pick_preemption_victim",
]

FIRST_FIT = "first_fit"
BEST_FIT = "best_fit"
MOLDABLE = "moldable"
PREEMPT_MIGRATE = "preempt_migrate"
BASELINE_KINDS = (FIRST_FIT, BEST_FIT, MOLDABLE, PREEMPT_MIGRATE)


@dataclass(frozen=True)
class BaselineParams:
    kind: str = FIRST_FIT
    migrate_bandwidth_mb_s: float = 1024.0
    migrate_fixed_overhead_s: float = 5.0
    ckpt_interval_s: float = 600.0
    # capacity_mb -> runtime multiplier; classes not listed run at 1.0
    speedup_table: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.migrate_bandwidth_mb_s <= 0 or self.ckpt_interval_s <= 0:
            raise ValueError("bandwidth and checkpoint interval must be positive")
        if self.migrate_fixed_overhead_s < 0:
            raise ValueError("fixed overhead must be >= 0")
        if any(m <= 0 for m in self.speedup_table.values()):
            raise ValueError("speedup multipliers must be positive")

    def multiplier(self, capacity_mb: int) -> float:
        return self.speedup_table.get(capacity_mb, 1.0)


@dataclass(frozen=True)
class Placement:
    job_id: str
    slice_id: str
    capacity_mb: int
    start_s: float
    est_end_s: float


def estimated_runtime_s(job: JobRuntime) -> float:
    """Median historical runtime, the statistical information parity point
    with the envelope-based path (no peeking at the actual run)."""
    samples = job.profile.runtime_samples
    return float(np.median(samples))


def _fits(s: SliceInstance, needed_mb: float, now: float) -> bool:
    # Baselines never schedule behind an existing reservation, so a slice is
    # usable only when nothing current or future occupies it.
    return s.capacity_mb >= needed_mb and s.idle_everywhere_after(now)


def monolithic_place(
    queue: list[JobRuntime],
    cluster: ClusterState,
    now: float,
    kind: str,
    params: BaselineParams,
) -> list[Placement]:
    """Greedy whole-job placement pass in arrival order.

    first_fit takes the first fitting slice in slice order; best_fit the
    fitting slice with the least spare capacity (ties by slice order).
    Jobs that fit nowhere simply stay queued.
    """
    placements: list[Placement] = []
    for job in sorted(queue, key=lambda j: (j.spec.arrival_s, j.spec.job_id)):
        needed = job.spec.declared_peak_mb
        if kind == MOLDABLE:
            chosen = moldable_capacity(job, cluster)
            if chosen is None:
                continue  # engine rejects at submission; defensive here
            fitting = [
                s for s in cluster.slices()
                if s.capacity_mb == chosen and s.idle_everywhere_after(now)
            ]
        else:
            fitting = [s for s in cluster.slices() if _fits(s, needed, now)]
            if kind == BEST_FIT:
                order = {s.slice_id: i for i, s in enumerate(cluster.slices())}
                fitting.sort(key=lambda s: (s.capacity_mb - needed, order[s.slice_id]))
        if not fitting:
            continue
        target = fitting[0]
        mult = params.multiplier(target.capacity_mb) if kind == MOLDABLE else 1.0
        remaining_fraction = 1.0 - job.completed_fraction
        est = max(
            job.grid_step, estimated_runtime_s(job) * remaining_fraction * mult
        )
        placements.append(
            Placement(job.spec.job_id, target.slice_id, target.capacity_mb, now, now + est)
        )
        target.reserve(now, now + est, job.spec.job_id)
    return placements


def moldable_capacity(job: JobRuntime, cluster: ClusterState) -> int | None:
    """Smallest capacity class present in the cluster covering the declared
    peak; fixed at submission. None means the job is rejected outright."""
    present = sorted({s.capacity_mb for s in cluster.slices()})
    for cap in present:
        if cap >= job.spec.declared_peak_mb:
            return cap
    return None


def transfer_delay_s(live_state_mb: float, params: BaselineParams) -> float:
    """Migration cost: live state over the wire plus a fixed restart charge."""
    return live_state_mb / params.migrate_bandwidth_mb_s + params.migrate_fixed_overhead_s


def checkpointed_progress_s(executed_s: float, params: BaselineParams) -> float:
    """Progress surviving an eviction: floor to the checkpoint cadence."""
    if executed_s <= 0:
        return 0.0
    periods = int(executed_s / params.ckpt_interval_s + 1e-9)
    return periods * params.ckpt_interval_s


def pick_preemption_victim(
    running: list[tuple[JobRuntime, str, int]],
    waiting_job: JobRuntime,
) -> tuple[JobRuntime, str, int] | None:
    """Lowest-priority running job strictly below the waiter, whose slice
    would fit the waiter's declared peak. Ties go to later arrivals."""
    usable = [
        (job, slice_id, cap)
        for job, slice_id, cap in running
        if job.spec.priority < waiting_job.spec.priority
        and cap >= waiting_job.spec.declared_peak_mb
    ]
    if not usable:
        return None
    return min(
        usable,
        key=lambda item: (item[0].spec.priority, -item[0].spec.arrival_s, item[0].spec.job_id),
    )

"""Offer, interest, grant, materialize: the scheduling-round protocol.

The scheduler advertises free execution windows; waiting jobs signal
interest or decline after a dry-run segmentation of the window against
their memory profile; a grant policy picks one interested job per offer;
only then does the chosen job materialize subjob state and reservations.
No subjob state is created until a grant is issued.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import policies as _policies
from .cluster import ExecutionWindow, SliceCatalog
from .profiles import RiskParams
from .segmentation import FragmentPlan, PlanRefusal, SegmentationConfig, plan_segments
from .workload import PLANNED, Checkpoint, JobRuntime, SubJob

__all__ = [
    "Offer",
    "InterestSignal",
    "Preference",
    "Grant",
    "advertise",
    "collect_interest",
    "grant_offer",
    "materialize",
    "MaterializeRefusal",
]

INTEREST = "interest"
DECLINE = "decline"
PREFERENCE = "preference"


@dataclass(frozen=True)
class Offer:
    """An advertised execution window with an expiry."""

    offer_id: str
    window: ExecutionWindow
    issued_at: float
    expires_at: float

    def __post_init__(self) -> None:
        if self.expires_at <= self.issued_at:
            raise ValueError(f"{self.offer_id}: expiry must follow issue time")


@dataclass(frozen=True)
class Preference:
    """Optional urgency hints attached to an interest signal."""

    deadline_s: float | None
    checkpoint_size_mb: float
    priority: int


@dataclass(frozen=True)
class InterestSignal:
    offer_id: str
    job_id: str
    kind: str  # interest | decline
    preference: Preference | None = None
    reason: str = ""


@dataclass(frozen=True)
class Grant:
    offer_id: str
    job_id: str
    granted_at: float


@dataclass(frozen=True)
class MaterializeRefusal:
    reason: str


def advertise(
    gaps: list[ExecutionWindow], now: float, ttl: float, seq_start: int = 0
) -> list[Offer]:
    """One offer per discovered gap; ids are deterministic sequence numbers."""
    if ttl <= 0:
        raise ValueError("offer ttl must be positive")
    return [
        Offer(f"offer-{seq_start + i:06d}", w, now, now + ttl)
        for i, w in enumerate(gaps)
    ]


def collect_interest(
    offer: Offer,
    waiting: list[JobRuntime],
    catalog: SliceCatalog,
    risk: RiskParams,
    seg: SegmentationConfig,
    now: float,
    online_correction: bool = True,
    resume_positions: dict[str, float] | None = None,
) -> list[InterestSignal]:
    """Dry-run each waiting job against the offer; pure, no state is created.

    A job signals interest iff segmentation yields at least one admissible
    fragment. Non-atomizable jobs always decline (they take the
    conventional placement path). Jobs with deadlines attach a preference.
    resume_positions lets the caller pipeline a job that already holds
    planned subjobs: its plan starts where the pending work ends.
    """
    if now >= offer.expires_at:
        raise ValueError(f"{offer.offer_id} has expired")
    signals: list[InterestSignal] = []
    for job in waiting:
        if not job.spec.atomizable:
            signals.append(
                InterestSignal(offer.offer_id, job.spec.job_id, DECLINE, reason="non-atomizable")
            )
            continue
        start_pos = (resume_positions or {}).get(job.spec.job_id)
        result = plan_segments(
            job,
            offer.window,
            catalog,
            risk,
            seg,
            online_correction=online_correction,
            start_position_s=start_pos,
        )
        if isinstance(result, PlanRefusal):
            signals.append(
                InterestSignal(offer.offer_id, job.spec.job_id, DECLINE, reason=result.reason)
            )
            continue
        pref = None
        if job.spec.deadline_s is not None:
            pref = Preference(
                deadline_s=job.spec.deadline_s,
                checkpoint_size_mb=job.spec.checkpoint_size_mb,
                priority=job.spec.priority,
            )
        signals.append(InterestSignal(offer.offer_id, job.spec.job_id, INTEREST, pref))
    return signals


def grant_offer(
    offer: Offer,
    interests: list[InterestSignal],
    policy: "_policies.GrantPolicy",
    ledger: "_policies.TenantLedger | None",
    ctx: "_policies.SelectionContext",
) -> Grant | None:
    """Apply the grant policy to the interested jobs; None when nobody wins."""
    job_id = _policies.select(policy, offer, interests, ledger, ctx)
    if job_id is None:
        return None
    return Grant(offer.offer_id, job_id, ctx.now)


def materialize(
    job: JobRuntime,
    granted: Grant,
    window: ExecutionWindow,
    catalog: SliceCatalog,
    risk: RiskParams,
    seg: SegmentationConfig,
    online_correction: bool = True,
    start_position_s: float | None = None,
) -> tuple[list[SubJob], list[FragmentPlan]] | MaterializeRefusal:
    """Re-validate the plan under the grant and mint SubJob records.

    Planning runs again here because the profile may have been refreshed
    since interest was signaled; a refusal returns the offer to the pool.
    Fragments that would start at or past the job's actual completion are
    not materialized (the job side knows its remaining iteration count).
    The first subjob resumes from the parent's latest checkpoint, unless
    the grant pipelines work beyond already planned subjobs (that
    checkpoint does not exist yet).
    """
    if granted.job_id != job.spec.job_id:
        raise ValueError("grant addressed to a different job")
    result = plan_segments(
        job,
        window,
        catalog,
        risk,
        seg,
        online_correction=online_correction,
        start_position_s=start_position_s,
    )
    if isinstance(result, PlanRefusal):
        return MaterializeRefusal(result.reason)
    chained = (
        start_position_s is not None and start_position_s > job.position_s + 1e-9
    )
    span = job.actual_duration_s
    subjobs: list[SubJob] = []
    kept: list[FragmentPlan] = []
    for i, plan in enumerate(result):
        if plan.pos_from_s >= span - 1e-9:
            break
        subjobs.append(
            SubJob(
                subjob_id=job.next_subjob_id(),
                parent=job.spec.job_id,
                window_start_s=plan.wall_start_s,
                window_duration_s=plan.duration_s,
                slice_id=window.slice_id,
                slice_capacity_mb=plan.capacity_mb,
                work_from=job.fraction_at(plan.pos_from_s),
                work_to=job.fraction_at(plan.pos_to_s),
                predicted_peak_mb=plan.predicted_peak_mb,
                status=PLANNED,
                resume_from=job.last_checkpoint if i == 0 and not chained else None,
                offer_id=granted.offer_id,
                admission_probability=plan.admission_probability,
                pos_from_s=plan.pos_from_s,
                pos_to_s=plan.pos_to_s,
            )
        )
        kept.append(plan)
    if not subjobs:
        return MaterializeRefusal("no materializable fragment before job end")
    return subjobs, kept

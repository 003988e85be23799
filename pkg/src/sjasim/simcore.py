"""Discrete-event engine: offer-driven atomized scheduling vs baselines.

One event loop serves both scheduler families. Ground truth for every job
is a trajectory drawn up front (fresh generator draw, or a bootstrap pick
from its historical ensemble) and keyed only by (seed, job index), so all
schedulers face identical workload realizations at a given seed. Execution
advances one grid-step of job progress per grid-step of wall time on the
assigned slice (scaled by a runtime multiplier for moldable sizing); the
engine precomputes, at unit start, whether and when the actual trajectory
first exceeds the enforced capacity, and schedules the kill then.

Scheduling happens in rounds, triggered by arrivals, completions, kills
and a periodic timer. A round either runs the offer/interest/grant cycle
(atomized path, with a conventional fallback for jobs that cannot be
split) or a monolithic placement pass (baselines). Identical inputs give
identical event sequences; rerunning a seed reproduces the log verbatim.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (
    FIRST_FIT,
    MOLDABLE,
    PREEMPT_MIGRATE,
    BaselineParams,
    checkpointed_progress_s,
    moldable_capacity,
    monolithic_place,
    pick_preemption_victim,
    transfer_delay_s,
)
from .cluster import (
    DEFAULT_CATALOG,
    ClusterState,
    SliceCatalog,
    find_gaps,
    release_tail,
    reserve,
)
from .policies import (
    GrantPolicy,
    SelectionContext,
    TenantLedger,
    jain_index,
    offer_cost_tokens,
)
from .profiles import (
    RiskParams,
    TrajectoryEnsemble,
    build_profile,
    nearest_rank,
    refresh_profile,
    single_run_profile,
)
from .protocol import (
    INTEREST,
    MaterializeRefusal,
    advertise,
    collect_interest,
    grant_offer,
    materialize,
)
from .segmentation import SegmentationConfig
from .workload import Checkpoint, JobRuntime, JobSpec, generate_trajectory

__all__ = [
    "SCHEDULERS",
    "Scenario",
    "SimConfig",
    "SimulationTimeout",
    "DelaySummary",
    "MetricsReport",
    "ComparisonResult",
    "draw_actual_runs",
    "run",
    "compare",
]

SCHEDULERS = ("sja", "first_fit", "best_fit", "moldable", "preempt_migrate")

# Sub-streams of the run seed; arbitrary distinct constants.
_ACTUAL_STREAM = 11
_FAILURE_STREAM = 29

# Same-timestamp event order: frees before claims, decisions last.
_KPRIO = {
    "oom_kill": 0,
    "subjob_end": 1,
    "failure_inject": 2,
    "arrival": 3,
    "offer_expire": 4,
    "subjob_start": 5,
    "round_timer": 6,
}

_EPS = 1e-9


class SimulationTimeout(RuntimeError):
    """The event clock passed the configured wall cap; likely a livelock."""


@dataclass
class Scenario:
    """A workload: job specs plus the historical ensembles they reference.

    Every job must name an ensemble (its profile source); `truths` may pin
    explicit ground-truth trajectories for individual jobs, overriding the
    seeded draw.
    """

    jobs: list[JobSpec]
    ensembles: dict[str, TrajectoryEnsemble]
    truths: dict[str, np.ndarray] = field(default_factory=dict)
    name: str = "scenario"

    @classmethod
    def from_file(cls, path) -> "Scenario":
        from .workload import ingest_scenario

        jobs, ensembles, truths = ingest_scenario(path)
        return cls(jobs, ensembles, truths, name=str(path))


@dataclass(frozen=True)
class SimConfig:
    """Engine knobs. The scheduler itself is chosen per run, not here."""

    eps: float = 0.05
    alpha_t: float = 0.05
    tau_min_s: float = 300.0
    tau_max_s: float = 3600.0
    smoothing_window_s: float = 120.0
    hysteresis_delta: float = 0.15
    lookahead_s: float = 1800.0
    round_cadence_s: float = 60.0
    offer_ttl_s: float = 60.0
    max_concurrent_subjobs_per_job: int = 1
    policy: GrantPolicy = field(default_factory=GrantPolicy)
    gpus: int = 1
    slices_per_gpu: tuple[int, ...] = (20480, 10240, 5120, 5120)
    catalog: SliceCatalog = DEFAULT_CATALOG
    failure_rate_per_hour: float = 0.0
    online_correction: bool = True
    max_oom_retries: int = 3
    n_historical_runs: int | None = None
    single_run_inflation: float = 1.10
    max_wait_s: float = math.inf
    sim_time_cap_s: float = 7 * 86400.0
    baseline: BaselineParams = field(default_factory=BaselineParams)

    def __post_init__(self) -> None:
        if self.round_cadence_s <= 0 or self.offer_ttl_s <= 0:
            raise ValueError("round cadence and offer ttl must be positive")
        if self.lookahead_s <= 0:
            raise ValueError("lookahead must be positive")
        if self.n_historical_runs is not None and self.n_historical_runs < 1:
            raise ValueError("n_historical_runs must be >= 1")
        if self.max_oom_retries < 0:
            raise ValueError("max_oom_retries must be >= 0")
        if self.max_concurrent_subjobs_per_job < 1:
            raise ValueError("max_concurrent_subjobs_per_job must be >= 1")
        # Force the derived parameter objects so bad combinations (inverted
        # tau bounds, eps outside (0,1)) surface at construction, not mid-run.
        self.risk()
        self.seg()

    def risk(self) -> RiskParams:
        return RiskParams(eps=self.eps, alpha_t=self.alpha_t)

    def seg(self) -> SegmentationConfig:
        return SegmentationConfig(
            tau_min_s=self.tau_min_s,
            tau_max_s=self.tau_max_s,
            smoothing_window_s=self.smoothing_window_s,
            hysteresis_delta=self.hysteresis_delta,
            eps=self.eps,
        )


def draw_actual_runs(
    scenario: Scenario, seed: int
) -> dict[str, np.ndarray]:
    """Ground-truth trajectory per job, identical across schedulers.

    Jobs with a generator get a fresh draw (duration jittered the same way
    their ensemble was built); jobs without one replay a uniformly chosen
    historical run. Explicit truths win over both.
    """
    out: dict[str, np.ndarray] = {}
    for idx, spec in enumerate(scenario.jobs):
        if spec.job_id in scenario.truths:
            out[spec.job_id] = np.asarray(scenario.truths[spec.job_id], dtype=float)
            continue
        if spec.ensemble_key is None or spec.ensemble_key not in scenario.ensembles:
            raise ValueError(f"{spec.job_id}: no ensemble for ground-truth draw")
        ens = scenario.ensembles[spec.ensemble_key]
        rng = np.random.default_rng([seed, _ACTUAL_STREAM, idx])
        if spec.generator is not None:
            h = ens.grid_step
            factor = 1.0 + rng.uniform(-spec.duration_jitter, spec.duration_jitter)
            nominal = spec.generator.total_duration_s
            duration = max(h, round(nominal * factor / h) * h)
            out[spec.job_id] = generate_trajectory(spec.generator, duration, h, rng)
        else:
            pick = int(rng.integers(len(ens.runs)))
            out[spec.job_id] = ens.runs[pick].copy()
    return out


@dataclass
class _Unit:
    """One running or planned occupancy of a slice (subjob or whole job)."""

    unit_id: str
    job_id: str
    kind: str  # "subjob" | "monolithic"
    slice_id: str
    physical_capacity_mb: int
    enforce_capacity_mb: float  # assigned class (subjob) or physical (monolithic)
    start_s: float
    pos_from_s: float
    pos_to_planned_s: float
    reserved_end_s: float
    res_owner: str
    multiplier: float = 1.0
    offer_id: str | None = None
    started: bool = False


@dataclass(frozen=True)
class DelaySummary:
    mean_s: float
    p50_s: float
    p95_s: float
    max_s: float
    count: int


def _delay_summary(delays: list[float]) -> DelaySummary:
    if not delays:
        nan = float("nan")
        return DelaySummary(nan, nan, nan, nan, 0)
    ordered = sorted(delays)
    n = len(ordered)
    return DelaySummary(
        mean_s=float(sum(ordered) / n),
        p50_s=nearest_rank(ordered, 0.5, n),
        p95_s=nearest_rank(ordered, 0.95, n),
        max_s=float(ordered[-1]),
        count=n,
    )


@dataclass
class MetricsReport:
    scheduler: str
    seed: int
    total_time_s: float
    reserved_utilization: float
    used_utilization: float
    queueing_delay: DelaySummary
    rejection_rate: float
    interruptions: int
    oom_violation_rate: float | None
    fragmentation_loss: float
    jain_fairness: float
    admission_disagreement: float | None
    completed_jobs: int
    admitted_subjobs: int
    oom_kills: int
    injected_failures: int
    per_tenant_reserved: dict[str, float]
    per_job_completion: list[tuple[str, float, float]]

    def scalars(self) -> dict[str, float]:
        """Flat numeric view for tables and CSV output."""
        nan = float("nan")
        return {
            "total_time_s": self.total_time_s,
            "reserved_utilization": self.reserved_utilization,
            "used_utilization": self.used_utilization,
            "queueing_delay_mean_s": self.queueing_delay.mean_s,
            "queueing_delay_p50_s": self.queueing_delay.p50_s,
            "queueing_delay_p95_s": self.queueing_delay.p95_s,
            "queueing_delay_max_s": self.queueing_delay.max_s,
            "rejection_rate": self.rejection_rate,
            "interruptions": float(self.interruptions),
            "oom_violation_rate": (
                nan if self.oom_violation_rate is None else self.oom_violation_rate
            ),
            "fragmentation_loss": self.fragmentation_loss,
            "jain_fairness": self.jain_fairness,
            "admission_disagreement": (
                nan if self.admission_disagreement is None else self.admission_disagreement
            ),
            "completed_jobs": float(self.completed_jobs),
            "admitted_subjobs": float(self.admitted_subjobs),
            "oom_kills": float(self.oom_kills),
            "injected_failures": float(self.injected_failures),
        }


class _Engine:
    def __init__(self, scenario: Scenario, scheduler: str, cfg: SimConfig, seed: int):
        if scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {scheduler!r}, pick from {SCHEDULERS}")
        self.scenario = scenario
        self.scheduler = scheduler
        self.cfg = cfg
        self.seed = seed
        self.cluster = ClusterState.from_layout(
            cfg.gpus, cfg.slices_per_gpu, cfg.catalog
        )
        self.risk = cfg.risk()
        self.seg = cfg.seg()
        self.base_params = replace(
            cfg.baseline, kind=scheduler if scheduler in (MOLDABLE, PREEMPT_MIGRATE) else FIRST_FIT
        )
        self.ledger = TenantLedger(cfg.policy.token_budgets)

        steps = {e.grid_step for e in scenario.ensembles.values()}
        if len(steps) > 1:
            raise ValueError(f"mixed ensemble grid steps {sorted(steps)}")
        self.h = steps.pop() if steps else 1.0

        self.profiles = {
            key: self._initial_profile(ens) for key, ens in scenario.ensembles.items()
        }
        actuals = draw_actual_runs(scenario, seed)
        self._order: list[JobRuntime] = []
        self.jobs: dict[str, JobRuntime] = {}
        for spec in scenario.jobs:
            if spec.ensemble_key not in self.profiles:
                raise ValueError(f"{spec.job_id}: unknown ensemble {spec.ensemble_key!r}")
            job = JobRuntime(
                spec=spec,
                profile=self.profiles[spec.ensemble_key],
                actual=actuals[spec.job_id],
                grid_step=self.h,
            )
            self._order.append(job)
            self.jobs[spec.job_id] = job

        self.now = 0.0
        self.heap: list = []
        self._seq = 0
        self._round_due = False
        self._offer_seq = 0
        self._granted_offers: set[str] = set()
        self._arrivals_pending = len(self._order)
        self._n_terminal = 0
        self.units: dict[str, _Unit] = {}

        self.event_log: list[dict] = []
        self.archive: list[tuple[str, int, float, float, str, str]] = []
        self.used_mem_time = 0.0
        self.queue_intervals: list[tuple[float, float]] = []
        self._queue_since: float | None = None
        self.n_preemptions = 0
        self.n_oom = 0
        self.n_injected = 0
        self.n_rejected = 0
        self.admitted_units = 0
        self.frag_admissions = 0
        self.frag_disagreements = 0

        self._failure_rng = np.random.default_rng([seed, _FAILURE_STREAM])
        for job in self._order:
            self._push(job.spec.arrival_s, "arrival", {"job": job.spec.job_id})
        self._push(0.0, "round_timer", {"periodic": True})
        if cfg.failure_rate_per_hour > 0:
            mean = 3600.0 / cfg.failure_rate_per_hour
            self._push(
                float(self._failure_rng.exponential(mean)), "failure_inject", {}
            )

    def _initial_profile(self, ens: TrajectoryEnsemble):
        n = self.cfg.n_historical_runs
        levels = (self.cfg.eps,)
        if n is not None and n < len(ens.runs):
            if n == 1:
                return single_run_profile(
                    ens.runs[0], ens.grid_step, self.cfg.single_run_inflation, levels
                )
            subset = TrajectoryEnsemble(grid_step=ens.grid_step, runs=ens.runs[:n])
            return build_profile(subset, levels)
        if len(ens.runs) == 1:
            return single_run_profile(
                ens.runs[0], ens.grid_step, self.cfg.single_run_inflation, levels
            )
        return build_profile(ens, levels)

    # ------------------------------------------------------------------
    # Event plumbing
    # ------------------------------------------------------------------

    def _push(self, t: float, kind: str, payload: dict) -> None:
        heapq.heappush(self.heap, (t, _KPRIO[kind], self._seq, kind, payload))
        self._seq += 1

    def _log(self, kind: str, **fields) -> None:
        rec = {"t": round(self.now, 6), "kind": kind}
        rec.update(fields)
        self.event_log.append(rec)

    def run(self) -> tuple[MetricsReport, list[dict]]:
        while self.heap and self._n_terminal < len(self._order):
            t, _, _, kind, payload = heapq.heappop(self.heap)
            if t > self.cfg.sim_time_cap_s:
                raise SimulationTimeout(
                    f"event clock passed {self.cfg.sim_time_cap_s} s"
                )
            self.now = t
            self._dispatch(kind, payload)
            if self._round_due and (not self.heap or self.heap[0][0] > self.now + _EPS):
                self._round_due = False
                self._run_round()
        self._queue_note()  # close an open queue interval at the final clock
        if self._queue_since is not None:
            if self.now > self._queue_since:
                self.queue_intervals.append((self._queue_since, self.now))
            self._queue_since = None
        return self._report(), self.event_log

    def _dispatch(self, kind: str, p: dict) -> None:
        if kind == "arrival":
            self._on_arrival(p["job"])
        elif kind == "subjob_start":
            self._on_start(p["unit"])
        elif kind == "subjob_end":
            self._on_end(p["unit"], p["end_idx"])
        elif kind == "oom_kill":
            self._on_oom(p["unit"], p["kill_idx"])
        elif kind == "failure_inject":
            self._on_failure()
        elif kind == "offer_expire":
            if p["offer"] not in self._granted_offers:
                self._log("offer_expire", offer=p["offer"])
        elif kind == "round_timer":
            self._round_due = True
            if p.get("periodic") and self._n_terminal < len(self._order):
                self._push(self.now + self.cfg.round_cadence_s, "round_timer", p)
        else:  # pragma: no cover - event kinds are closed
            raise ValueError(f"unknown event kind {kind!r}")

    # ------------------------------------------------------------------
    # Job state helpers
    # ------------------------------------------------------------------

    def _waiting(self) -> list[JobRuntime]:
        return [
            j
            for j in self._order
            if j.status == "waiting" and j.spec.arrival_s <= self.now + _EPS
        ]

    def _queue_note(self) -> None:
        nonempty = bool(self._waiting())
        if nonempty and self._queue_since is None:
            self._queue_since = self.now
        elif not nonempty and self._queue_since is not None:
            if self.now > self._queue_since:
                self.queue_intervals.append((self._queue_since, self.now))
            self._queue_since = None

    def _reject(self, job: JobRuntime, reason: str) -> None:
        job.status = "rejected"
        self._n_terminal += 1
        self.n_rejected += 1
        self._log("job_rejected", job=job.spec.job_id, reason=reason)
        self._queue_note()

    def _complete(self, job: JobRuntime) -> None:
        job.status = "completed"
        job.finish_s = self.now
        self._n_terminal += 1
        self._log(
            "job_completed",
            job=job.spec.job_id,
            finish_s=round(self.now, 6),
            reexecuted_s=round(job.reexecuted_s, 6),
        )
        if self.cfg.online_correction:
            key = job.spec.ensemble_key
            if key is not None and key in self.profiles:
                fresh = refresh_profile(self.profiles[key], job.actual)
                self.profiles[key] = fresh
                for other in self._order:
                    if other.spec.ensemble_key == key:
                        other.profile = fresh

    def _archive_span(self, unit: _Unit, end: float) -> None:
        if end <= unit.start_s + _EPS:
            return
        job = self.jobs[unit.job_id]
        self.archive.append(
            (
                unit.slice_id,
                unit.physical_capacity_mb,
                unit.start_s,
                end,
                unit.job_id,
                job.spec.tenant_id,
            )
        )

    def _cancel_planned(self, job_id: str, reason: str) -> None:
        doomed = [
            uid
            for uid, u in self.units.items()
            if u.job_id == job_id and not u.started
        ]
        for uid in doomed:
            u = self.units.pop(uid)
            release_tail(self.cluster, u.res_owner, u.start_s)
            self._log("subjob_cancelled", unit=uid, job=job_id, reason=reason)

    # ------------------------------------------------------------------
    # Event handlers
    # ------------------------------------------------------------------

    def _on_arrival(self, job_id: str) -> None:
        job = self.jobs[job_id]
        self._arrivals_pending -= 1
        self._log(
            "arrival",
            job=job_id,
            tenant=job.spec.tenant_id,
            declared_peak_mb=job.spec.declared_peak_mb,
            atomizable=job.spec.atomizable,
        )
        if self.scheduler == MOLDABLE and moldable_capacity(job, self.cluster) is None:
            self._reject(job, "no capacity class covers the declared peak")
            return
        self._queue_note()
        self._round_due = True

    def _on_start(self, unit_id: str) -> None:
        unit = self.units.get(unit_id)
        if unit is None:
            return  # plan was cancelled before its window opened
        job = self.jobs[unit.job_id]
        unit.started = True
        self.admitted_units += 1
        job.status = "running"
        if job.first_start_s is None:
            job.first_start_s = self.now
        self._queue_note()
        i0 = int(round(unit.pos_from_s / self.h))
        end_pos = min(unit.pos_to_planned_s, job.actual_duration_s)
        i1 = int(round(end_pos / self.h))
        self._log(
            "subjob_start",
            unit=unit_id,
            job=unit.job_id,
            slice=unit.slice_id,
            capacity_mb=unit.enforce_capacity_mb,
            pos_from_s=round(unit.pos_from_s, 6),
        )
        over = np.nonzero(job.actual[i0:i1] > unit.enforce_capacity_mb + 1e-6)[0]
        if over.size:
            k = i0 + int(over[0])
            t_kill = self.now + (k - i0) * self.h * unit.multiplier
            self._push(t_kill, "oom_kill", {"unit": unit_id, "kill_idx": k})
        else:
            t_end = self.now + (i1 - i0) * self.h * unit.multiplier
            self._push(t_end, "subjob_end", {"unit": unit_id, "end_idx": i1})

    def _on_end(self, unit_id: str, end_idx: int) -> None:
        unit = self.units.pop(unit_id, None)
        if unit is None:
            return
        job = self.jobs[unit.job_id]
        i0 = int(round(unit.pos_from_s / self.h))
        end_pos = end_idx * self.h
        self.used_mem_time += (
            float(np.sum(job.actual[i0:end_idx])) * self.h * unit.multiplier
        )
        job.position_s = max(job.position_s, end_pos)
        if self.now < unit.reserved_end_s - _EPS:
            release_tail(self.cluster, unit.res_owner, self.now)
        self._archive_span(unit, self.now)
        done = end_pos >= job.actual_duration_s - _EPS
        self._log(
            "subjob_end",
            unit=unit_id,
            job=unit.job_id,
            pos_to_s=round(end_pos, 6),
            completed_job=done,
        )
        if done:
            self._cancel_planned(unit.job_id, "job already complete")
            self._complete(job)
        else:
            frac = job.fraction_at(end_pos)
            job.last_checkpoint = Checkpoint(
                job.spec.job_id, frac, job.spec.checkpoint_size_mb, self.now
            )
            self._log(
                "checkpoint",
                job=unit.job_id,
                fraction=round(frac, 6),
                size_mb=job.spec.checkpoint_size_mb,
            )
            more = any(u.job_id == unit.job_id for u in self.units.values())
            job.status = "scheduled" if more else "waiting"
        self._queue_note()
        self._round_due = True

    def _kill_unit(
        self, unit: _Unit, kill_idx: int, status_kind: str, reason_fields: dict
    ) -> None:
        """Shared teardown for OOM and injected kills; unit already popped."""
        job = self.jobs[unit.job_id]
        i0 = int(round(unit.pos_from_s / self.h))
        kill_pos = kill_idx * self.h
        self.used_mem_time += (
            float(np.sum(job.actual[i0:kill_idx])) * self.h * unit.multiplier
        )
        revert_pos = unit.pos_from_s
        if unit.kind == "monolithic" and self.scheduler == PREEMPT_MIGRATE:
            revert_pos = unit.pos_from_s + checkpointed_progress_s(
                kill_pos - unit.pos_from_s, self.base_params
            )
        job.position_s = revert_pos
        lost = kill_pos - revert_pos
        job.reexecuted_s += lost
        if self.now < unit.reserved_end_s - _EPS:
            release_tail(self.cluster, unit.res_owner, self.now)
        self._archive_span(unit, self.now)
        self._cancel_planned(unit.job_id, f"sibling {status_kind}")
        self._log(
            status_kind,
            unit=unit.unit_id,
            job=unit.job_id,
            kill_pos_s=round(kill_pos, 6),
            planned_s=round(unit.pos_to_planned_s - unit.pos_from_s, 6),
            lost_s=round(lost, 6),
            **reason_fields,
        )
        job.status = "waiting"
        self._queue_note()
        self._round_due = True

    def _on_oom(self, unit_id: str, kill_idx: int) -> None:
        unit = self.units.pop(unit_id, None)
        if unit is None:
            return
        job = self.jobs[unit.job_id]
        self.n_oom += 1
        i0 = int(round(unit.pos_from_s / self.h))
        observed = float(job.actual[kill_idx])
        if self.cfg.online_correction:
            job.note_demand(i0, job.actual[i0 : kill_idx + 1])
        self._kill_unit(
            unit,
            kill_idx,
            "oom_kill",
            {
                "capacity_mb": unit.enforce_capacity_mb,
                "observed_mb": round(observed, 6),
            },
        )
        # Without correction the next plan would repeat the mistake, so a
        # strike limit breaks the loop; monolithic placement never adapts.
        if unit.kind == "monolithic" or not self.cfg.online_correction:
            job.oom_strikes += 1
            if job.oom_strikes > self.cfg.max_oom_retries:
                self._reject(job, "out-of-memory retry budget exhausted")

    def _on_failure(self) -> None:
        mean = 3600.0 / self.cfg.failure_rate_per_hour
        running = sorted(uid for uid, u in self.units.items() if u.started)
        if running:
            victim_id = running[int(self._failure_rng.integers(len(running)))]
            unit = self.units.pop(victim_id)
            self.n_injected += 1
            i0 = int(round(unit.pos_from_s / self.h))
            steps = int((self.now - unit.start_s) / (self.h * unit.multiplier) + _EPS)
            self._kill_unit(unit, i0 + steps, "failure_inject", {})
        if self._n_terminal < len(self._order):
            self._push(
                self.now + float(self._failure_rng.exponential(mean)),
                "failure_inject",
                {},
            )

    # ------------------------------------------------------------------
    # Scheduling rounds
    # ------------------------------------------------------------------

    def _run_round(self) -> None:
        if math.isfinite(self.cfg.max_wait_s):
            for job in self._waiting():
                if self.now - job.spec.arrival_s > self.cfg.max_wait_s:
                    self._reject(job, "max queue wait exceeded")
        if self.scheduler == "sja":
            progress = self._sja_round()
        else:
            progress = self._baseline_round()
        gated = any(
            j.earliest_resume_s > self.now + _EPS for j in self._waiting()
        )
        if (
            not progress
            and not gated
            and not self.units
            and self._arrivals_pending == 0
            and self._waiting()
        ):
            # Nothing running, nothing coming, and a full pass granted
            # nothing: these jobs will never place.
            for job in list(self._waiting()):
                self._reject(job, "no feasible placement; queue quiescent")

    def _selection_context(
        self, candidates: list[JobRuntime], resume: dict[str, float]
    ) -> SelectionContext:
        def rem(j: JobRuntime) -> float:
            pos = resume.get(j.spec.job_id)
            return 1.0 - (j.completed_fraction if pos is None else j.fraction_at(pos))

        return SelectionContext(
            now=self.now,
            arrivals={j.spec.job_id: j.spec.arrival_s for j in candidates},
            priorities={j.spec.job_id: j.spec.priority for j in candidates},
            deadlines={j.spec.job_id: j.spec.deadline_s for j in candidates},
            tenants={j.spec.job_id: j.spec.tenant_id for j in candidates},
            remaining_fraction={j.spec.job_id: rem(j) for j in candidates},
            profiles={j.spec.job_id: j.profile for j in candidates},
            alpha_t=self.cfg.alpha_t,
        )

    def _pipeline_candidates(self, window_start: float) -> tuple[list[JobRuntime], dict[str, float]]:
        """Scheduled jobs that may take a further grant beyond their pending
        plan (bounded by max_concurrent_subjobs_per_job; the new window must
        not overlap already planned subjobs)."""
        if self.cfg.max_concurrent_subjobs_per_job <= 1:
            return [], {}
        extra: list[JobRuntime] = []
        resume: dict[str, float] = {}
        by_job: dict[str, list[_Unit]] = {}
        for u in self.units.values():
            if u.kind == "subjob":
                by_job.setdefault(u.job_id, []).append(u)
        for job in self._order:
            units = by_job.get(job.spec.job_id)
            if not units or not job.spec.atomizable:
                continue
            chains = len({u.offer_id for u in units})
            if chains >= self.cfg.max_concurrent_subjobs_per_job:
                continue
            wall_end = max(u.reserved_end_s for u in units)
            pending = max(u.pos_to_planned_s for u in units)
            if window_start < wall_end - _EPS:
                continue
            if pending >= job.actual_duration_s - _EPS:
                continue
            extra.append(job)
            resume[job.spec.job_id] = pending
        return extra, resume

    def _sja_round(self) -> bool:
        waiting = self._waiting()
        if not waiting:
            return False
        progress = False
        has_atomizable = any(j.spec.atomizable for j in waiting)
        if has_atomizable:
            gaps = find_gaps(
                self.cluster,
                self.now,
                self.cfg.lookahead_s,
                min_duration=self.seg.tau_min_s,
            )
            # Grant earliest-starting gaps first (longest on ties) so a job
            # never books a far-future stub while another slice idles now.
            gaps.sort(key=lambda w: (w.start, -w.duration, w.slice_id))
            offers = advertise(gaps, self.now, self.cfg.offer_ttl_s, self._offer_seq)
            self._offer_seq += len(offers)
            for offer in offers:
                self._log(
                    "offer_issued",
                    offer=offer.offer_id,
                    slice=offer.window.slice_id,
                    capacity_mb=offer.window.capacity_mb,
                    window_start=round(offer.window.start, 6),
                    window_s=round(offer.window.duration, 6),
                )
                if self._grant_one(offer):
                    progress = True
                else:
                    self._push(offer.expires_at, "offer_expire", {"offer": offer.offer_id})
        leftovers = [
            j for j in self._waiting() if not j.spec.atomizable
        ]
        if leftovers and self._place_monolithic(leftovers, FIRST_FIT):
            progress = True
        return progress

    def _grant_one(self, offer) -> bool:
        """Interest, grant, materialize for a single offer. True on success."""
        candidates = [j for j in self._waiting() if j.spec.atomizable]
        extra, resume = self._pipeline_candidates(offer.window.start)
        candidates += extra
        if not candidates:
            return False
        signals = collect_interest(
            offer,
            candidates,
            self.cfg.catalog,
            self.risk,
            self.seg,
            self.now,
            online_correction=self.cfg.online_correction,
            resume_positions=resume,
        )
        for s in signals:
            if s.kind == INTEREST:
                self._log("interest", offer=offer.offer_id, job=s.job_id)
            else:
                self._log("decline", offer=offer.offer_id, job=s.job_id, reason=s.reason)
        interested = [s for s in signals if s.kind == INTEREST]
        if not interested:
            return False
        ctx = self._selection_context(candidates, resume)
        granted = grant_offer(offer, signals, self.cfg.policy, self.ledger, ctx)
        if granted is None:
            return False
        job = self.jobs[granted.job_id]
        cost = 0.0
        if self.cfg.policy.kind == "fair_tokens":
            cost = offer_cost_tokens(offer, self.cfg.policy.cost_rate)
            self.ledger.debit(job.spec.tenant_id, cost)
        self._log(
            "grant",
            offer=offer.offer_id,
            job=granted.job_id,
            cost_tokens=round(cost, 6),
        )
        result = materialize(
            job,
            granted,
            offer.window,
            self.cfg.catalog,
            self.risk,
            self.seg,
            online_correction=self.cfg.online_correction,
            start_position_s=resume.get(granted.job_id),
        )
        if isinstance(result, MaterializeRefusal):
            if cost:
                self.ledger.refund(job.spec.tenant_id, cost)
            self._log(
                "materialize_refusal",
                offer=offer.offer_id,
                job=granted.job_id,
                reason=result.reason,
            )
            return False
        subjobs, plans = result
        self._granted_offers.add(offer.offer_id)
        for sj, plan in zip(subjobs, plans):
            end = sj.window_start_s + sj.window_duration_s
            reserve(self.cluster, sj.slice_id, sj.window_start_s, end, sj.subjob_id)
            self.units[sj.subjob_id] = _Unit(
                unit_id=sj.subjob_id,
                job_id=sj.parent,
                kind="subjob",
                slice_id=sj.slice_id,
                physical_capacity_mb=offer.window.capacity_mb,
                enforce_capacity_mb=sj.slice_capacity_mb,
                start_s=sj.window_start_s,
                pos_from_s=sj.pos_from_s,
                pos_to_planned_s=sj.pos_to_s,
                reserved_end_s=end,
                res_owner=sj.subjob_id,
                offer_id=offer.offer_id,
            )
            self._push(sj.window_start_s, "subjob_start", {"unit": sj.subjob_id})
            self.frag_admissions += 1
            self.frag_disagreements += int(plan.methods_disagree)
            self._log(
                "subjob_created",
                unit=sj.subjob_id,
                job=sj.parent,
                offer=offer.offer_id,
                slice=sj.slice_id,
                capacity_mb=sj.slice_capacity_mb,
                window_start=round(sj.window_start_s, 6),
                window_s=round(sj.window_duration_s, 6),
                pos_from_s=round(sj.pos_from_s, 6),
                pos_to_s=round(sj.pos_to_s, 6),
                work_from=round(sj.work_from, 6),
                work_to=round(sj.work_to, 6),
                admission_probability=round(sj.admission_probability, 6),
            )
        if job.status == "waiting":
            job.status = "scheduled"
        self._queue_note()
        return True

    def _place_monolithic(self, queue: list[JobRuntime], kind: str) -> bool:
        placements = monolithic_place(
            queue, self.cluster, self.now, kind, self.base_params
        )
        for p in placements:
            job = self.jobs[p.job_id]
            mult = (
                self.base_params.multiplier(p.capacity_mb) if kind == MOLDABLE else 1.0
            )
            remaining = job.actual_duration_s - job.position_s
            actual_end = p.start_s + remaining * mult
            reserved_end = max(p.est_end_s, actual_end)
            if reserved_end > p.est_end_s + _EPS:
                # The estimate undershot; keep the slice marked busy for the
                # job's real occupancy so nothing double-books it.
                self._extend_reservation(p.slice_id, p.job_id, reserved_end)
            uid = job.next_placement_id()
            self.units[uid] = _Unit(
                unit_id=uid,
                job_id=p.job_id,
                kind="monolithic",
                slice_id=p.slice_id,
                physical_capacity_mb=p.capacity_mb,
                enforce_capacity_mb=p.capacity_mb,
                start_s=p.start_s,
                pos_from_s=job.position_s,
                pos_to_planned_s=job.actual_duration_s,
                reserved_end_s=reserved_end,
                res_owner=p.job_id,
                multiplier=mult,
            )
            self._push(p.start_s, "subjob_start", {"unit": uid})
            job.status = "scheduled"
            self._log(
                "placement",
                unit=uid,
                job=p.job_id,
                slice=p.slice_id,
                capacity_mb=p.capacity_mb,
                est_end_s=round(p.est_end_s, 6),
            )
        if placements:
            self._queue_note()
        return bool(placements)

    def _extend_reservation(self, slice_id: str, owner: str, new_end: float) -> None:
        for r in reversed(self.cluster.slice(slice_id).reservations):
            if r.owner == owner:
                r.end = max(r.end, new_end)
                return
        raise KeyError(f"no reservation for {owner} on {slice_id}")

    def _baseline_round(self) -> bool:
        ready = [
            j for j in self._waiting() if j.earliest_resume_s <= self.now + _EPS
        ]
        if not ready:
            return False
        if self.scheduler != PREEMPT_MIGRATE:
            return self._place_monolithic(ready, self.scheduler)
        ready.sort(key=lambda j: (-j.spec.priority, j.spec.arrival_s, j.spec.job_id))
        progress = False
        for job in ready:
            if job.status != "waiting":
                continue
            if self._place_monolithic([job], FIRST_FIT):
                progress = True
                continue
            if self._try_preempt_for(job):
                progress = True
        return progress

    def _try_preempt_for(self, waiter: JobRuntime) -> bool:
        running = [
            (self.jobs[u.job_id], u.slice_id, u.physical_capacity_mb, uid)
            for uid, u in sorted(self.units.items())
            if u.started and u.kind == "monolithic"
        ]
        victim = pick_preemption_victim([r[:3] for r in running], waiter)
        if victim is None:
            return False
        victim_uid = next(
            uid for jr, sid, cap, uid in running if jr is victim[0] and sid == victim[1]
        )
        self._preempt(victim_uid, waiter.spec.job_id)
        return self._place_monolithic([waiter], FIRST_FIT)

    def _preempt(self, unit_id: str, by_job: str) -> None:
        unit = self.units.pop(unit_id)
        job = self.jobs[unit.job_id]
        i0 = int(round(unit.pos_from_s / self.h))
        steps = int((self.now - unit.start_s) / (self.h * unit.multiplier) + _EPS)
        cur_idx = i0 + steps
        cur_pos = cur_idx * self.h
        self.used_mem_time += (
            float(np.sum(job.actual[i0:cur_idx])) * self.h * unit.multiplier
        )
        kept = checkpointed_progress_s(cur_pos - unit.pos_from_s, self.base_params)
        new_pos = unit.pos_from_s + kept
        lost = cur_pos - new_pos
        job.position_s = new_pos
        job.reexecuted_s += lost
        live_mb = float(job.actual[cur_idx]) if cur_idx < len(job.actual) else 0.0
        delay = transfer_delay_s(live_mb, self.base_params)
        job.earliest_resume_s = self.now + delay
        job.status = "waiting"
        self.n_preemptions += 1
        if self.now < unit.reserved_end_s - _EPS:
            release_tail(self.cluster, unit.res_owner, self.now)
        self._archive_span(unit, self.now)
        self._log(
            "preemption",
            unit=unit_id,
            victim=unit.job_id,
            by=by_job,
            kept_s=round(kept, 6),
            lost_s=round(lost, 6),
            resume_at=round(job.earliest_resume_s, 6),
        )
        self._push(job.earliest_resume_s, "round_timer", {"periodic": False})
        self._queue_note()

    # ------------------------------------------------------------------
    # Reporting
    # ------------------------------------------------------------------

    def _report(self) -> MetricsReport:
        horizon = self.now
        cap_total = float(self.cluster.total_capacity_mb)
        denom = cap_total * horizon
        reserved = sum(cap * (e - s) for _, cap, s, e, _, _ in self.archive)

        tenants = sorted({j.spec.tenant_id for j in self._order})
        per_tenant = {t: 0.0 for t in tenants}
        for _, cap, s, e, _, tenant in self.archive:
            per_tenant[tenant] += cap * (e - s)

        delays = [
            j.first_start_s - j.spec.arrival_s
            for j in self._order
            if j.first_start_s is not None
        ]
        n_jobs = len(self._order)

        frag_loss = 0.0
        if denom > 0 and self.queue_intervals:
            busy_by_slice: dict[str, list[tuple[float, float]]] = {}
            for sid, _, s, e, _, _ in self.archive:
                busy_by_slice.setdefault(sid, []).append((s, e))
            for s in self.cluster.slices():
                busy = sorted(busy_by_slice.get(s.slice_id, []))
                idle = _complement(busy, 0.0, horizon)
                frag_loss += s.capacity_mb * _intersection_len(
                    idle, self.queue_intervals
                )
            frag_loss /= denom

        return MetricsReport(
            scheduler=self.scheduler,
            seed=self.seed,
            total_time_s=horizon,
            reserved_utilization=reserved / denom if denom > 0 else 0.0,
            used_utilization=self.used_mem_time / denom if denom > 0 else 0.0,
            queueing_delay=_delay_summary(delays),
            rejection_rate=self.n_rejected / n_jobs if n_jobs else 0.0,
            interruptions=self.n_preemptions,
            oom_violation_rate=(
                self.n_oom / self.admitted_units if self.admitted_units else None
            ),
            fragmentation_loss=frag_loss,
            jain_fairness=jain_index(per_tenant),
            admission_disagreement=(
                self.frag_disagreements / self.frag_admissions
                if self.frag_admissions
                else None
            ),
            completed_jobs=sum(1 for j in self._order if j.status == "completed"),
            admitted_subjobs=self.admitted_units,
            oom_kills=self.n_oom,
            injected_failures=self.n_injected,
            per_tenant_reserved=per_tenant,
            per_job_completion=[
                (j.spec.job_id, j.finish_s, j.reexecuted_s)
                for j in self._order
                if j.status == "completed"
            ],
        )


def _complement(
    busy: list[tuple[float, float]], start: float, end: float
) -> list[tuple[float, float]]:
    out = []
    cursor = start
    for s, e in busy:
        if s > cursor:
            out.append((cursor, min(s, end)))
        cursor = max(cursor, e)
        if cursor >= end:
            break
    if cursor < end:
        out.append((cursor, end))
    return out


def _intersection_len(
    a: list[tuple[float, float]], b: list[tuple[float, float]]
) -> float:
    i = j = 0
    total = 0.0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            total += hi - lo
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return total


def run(
    scenario: Scenario,
    scheduler: str = "sja",
    config: SimConfig | None = None,
    seed: int = 0,
) -> tuple[MetricsReport, list[dict]]:
    """Simulate one scheduler over one workload realization."""
    cfg = config if config is not None else SimConfig()
    return _Engine(scenario, scheduler, cfg, seed).run()


@dataclass
class ComparisonResult:
    seeds: tuple[int, ...]
    reports: dict[str, list[MetricsReport]]

    def table(self) -> dict[str, dict[str, tuple[float, float]]]:
        """scheduler -> metric -> (mean, sample sd) over seeds, nan-skipping."""
        out: dict[str, dict[str, tuple[float, float]]] = {}
        for sched, reps in self.reports.items():
            cols: dict[str, list[float]] = {}
            for r in reps:
                for k, v in r.scalars().items():
                    cols.setdefault(k, []).append(v)
            row = {}
            for k, vs in cols.items():
                clean = [v for v in vs if not math.isnan(v)]
                if not clean:
                    row[k] = (float("nan"), 0.0)
                else:
                    mean = sum(clean) / len(clean)
                    sd = (
                        math.sqrt(
                            sum((v - mean) ** 2 for v in clean) / (len(clean) - 1)
                        )
                        if len(clean) > 1
                        else 0.0
                    )
                    row[k] = (mean, sd)
            out[sched] = row
        return out


def compare(
    scenario: Scenario,
    schedulers: tuple[str, ...] = SCHEDULERS,
    config: SimConfig | None = None,
    seeds: tuple[int, ...] = (0,),
) -> ComparisonResult:
    """Run every scheduler over every seed with shared workload draws."""
    cfg = config if config is not None else SimConfig()
    reports: dict[str, list[MetricsReport]] = {s: [] for s in schedulers}
    for sched in schedulers:
        for seed in seeds:
            report, _ = run(scenario, sched, cfg, seed)
            reports[sched].append(report)
    return ComparisonResult(tuple(seeds), reports)

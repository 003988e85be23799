"""Jobs, subjobs, checkpoints, and synthetic trajectory generation.

Memory trajectories follow a phase model (warmup ramp, noisy steady state,
bursty phases). Work is a scalar fraction of the job's actual execution
span; a subjob covers a contiguous fraction interval and resumes from its
parent's latest checkpoint.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .profiles import FunctionalProfile, TrajectoryEnsemble, load_ensemble

__all__ = [
    "ScenarioError",
    "Phase",
    "PhaseModel",
    "JobSpec",
    "SubJob",
    "Checkpoint",
    "JobRuntime",
    "generate_trajectory",
    "synth_ensemble",
    "ingest_scenario",
    "write_scenario",
    "SCENARIO_HEADER",
]

WARMUP = "warmup"
STEADY = "steady"
BURST = "burst"
PHASE_KINDS = (WARMUP, STEADY, BURST)

PLANNED = "planned"
RUNNING = "running"
COMPLETED = "completed"
FAILED_OOM = "failed_oom"
FAILED_INJECTED = "failed_injected"
SUBJOB_STATUSES = (PLANNED, RUNNING, COMPLETED, FAILED_OOM, FAILED_INJECTED)


class ScenarioError(ValueError):
    """Malformed scenario input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Phase:
    kind: str
    duration_s: float
    base_mb: float
    noise_sd_mb: float = 0.0
    burst_amp_mb: float = 0.0
    burst_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in PHASE_KINDS:
            raise ScenarioError(f"unknown phase kind {self.kind!r}")
        if self.duration_s <= 0 or self.base_mb < 0 or self.noise_sd_mb < 0:
            raise ScenarioError("phase duration must be positive, levels non-negative")
        if not 0.0 <= self.burst_prob <= 1.0:
            raise ScenarioError("burst_prob must lie in [0, 1]")


@dataclass(frozen=True)
class PhaseModel:
    """Piecewise memory-demand generator, deterministic per seed."""

    phases: tuple[Phase, ...]

    def __post_init__(self) -> None:
        if not self.phases:
            raise ScenarioError("phase model needs at least one phase")
        object.__setattr__(self, "phases", tuple(self.phases))

    @property
    def total_duration_s(self) -> float:
        return sum(p.duration_s for p in self.phases)

    @property
    def nominal_peak_mb(self) -> float:
        return max(p.base_mb + p.burst_amp_mb for p in self.phases)


def generate_trajectory(
    model: PhaseModel, duration_s: float, grid_step: float, seed
) -> np.ndarray:
    """Sample one run of `duration_s` on the grid; same seed, same run.

    Phase durations are scaled by duration_s / nominal so a jittered run
    keeps the same relative phase structure. Warmup ramps linearly from 0
    to base over the phase; steady adds clamped Gaussian noise around base;
    burst additionally spikes by burst_amp with burst_prob per grid step.
    """
    if duration_s <= 0 or grid_step <= 0:
        raise ScenarioError("duration and grid step must be positive")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s / grid_step)) + 1
    t = np.arange(n) * grid_step
    scale = duration_s / model.total_duration_s
    bounds = np.cumsum([p.duration_s * scale for p in model.phases])
    starts = np.concatenate([[0.0], bounds[:-1]])
    out = np.empty(n)
    # Assign each sample to the phase whose half-open interval contains it;
    # the final grid point belongs to the last phase.
    phase_idx = np.minimum(np.searchsorted(bounds, t, side="right"), len(model.phases) - 1)
    for k, phase in enumerate(model.phases):
        mask = phase_idx == k
        m = int(mask.sum())
        if m == 0:
            continue
        tk = t[mask]
        if phase.kind == WARMUP:
            local = (tk - starts[k]) / (phase.duration_s * scale)
            vals = phase.base_mb * local
        else:
            vals = np.full(m, phase.base_mb)
            if phase.noise_sd_mb > 0:
                vals = vals + rng.normal(0.0, phase.noise_sd_mb, size=m)
            if phase.kind == BURST and phase.burst_amp_mb > 0:
                vals = vals + phase.burst_amp_mb * (rng.random(m) < phase.burst_prob)
        out[mask] = vals
    return np.maximum(out, 0.0)


def synth_ensemble(
    model: PhaseModel,
    n_runs: int,
    duration_jitter: float,
    seed,
    grid_step: float = 60.0,
) -> TrajectoryEnsemble:
    """n_runs independent draws with durations jittered within +-jitter."""
    if n_runs < 2:
        raise ScenarioError("an ensemble needs at least 2 runs")
    if not 0.0 <= duration_jitter < 1.0:
        raise ScenarioError("duration_jitter must lie in [0, 1)")
    ss = np.random.SeedSequence(seed)
    jitter_rng = np.random.default_rng(ss.spawn(1)[0])
    children = ss.spawn(n_runs + 1)[1:]
    nominal = model.total_duration_s
    runs = []
    for child in children:
        factor = 1.0 + jitter_rng.uniform(-duration_jitter, duration_jitter)
        duration = max(grid_step, round(nominal * factor / grid_step) * grid_step)
        runs.append(generate_trajectory(model, duration, grid_step, child))
    return TrajectoryEnsemble(grid_step=grid_step, runs=runs)


@dataclass
class JobSpec:
    """Static description of one submitted job."""

    job_id: str
    tenant_id: str
    arrival_s: float
    total_work_s: float
    declared_peak_mb: float
    priority: int = 0
    deadline_s: float | None = None
    checkpoint_size_mb: float = 0.0
    atomizable: bool = True
    generator: PhaseModel | None = None
    duration_jitter: float = 0.0  # ground-truth draws jitter like the ensemble did
    profile: FunctionalProfile | None = None
    ensemble_key: str | None = None

    def __post_init__(self) -> None:
        if self.arrival_s < 0:
            raise ScenarioError(f"{self.job_id}: negative arrival")
        if self.total_work_s <= 0:
            raise ScenarioError(f"{self.job_id}: total work must be positive")
        if self.declared_peak_mb <= 0:
            raise ScenarioError(f"{self.job_id}: declared peak must be positive")
        if self.priority < 0:
            raise ScenarioError(f"{self.job_id}: priority must be >= 0")
        if self.checkpoint_size_mb < 0:
            raise ScenarioError(f"{self.job_id}: checkpoint size must be >= 0")


@dataclass
class Checkpoint:
    parent: str
    completed_fraction: float
    size_mb: float
    created_at_s: float


@dataclass
class SubJob:
    """One atomized fragment of a parent job, bound to a slice window."""

    subjob_id: str
    parent: str
    window_start_s: float
    window_duration_s: float
    slice_id: str
    slice_capacity_mb: int
    work_from: float
    work_to: float
    predicted_peak_mb: float
    status: str = PLANNED
    resume_from: Checkpoint | None = None
    offer_id: str | None = None
    admission_probability: float = 1.0
    pos_from_s: float = 0.0
    pos_to_s: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.work_from < self.work_to <= 1.0:
            raise ScenarioError(
                f"{self.subjob_id}: work segment [{self.work_from}, {self.work_to}] invalid"
            )
        if self.predicted_peak_mb > self.slice_capacity_mb:
            raise ScenarioError(
                f"{self.subjob_id}: predicted peak exceeds slice capacity"
            )
        if self.status not in SUBJOB_STATUSES:
            raise ScenarioError(f"{self.subjob_id}: unknown status {self.status}")


@dataclass
class JobRuntime:
    """Engine-side mutable state of one job.

    position_s walks the job-relative grid axis of the ground-truth run;
    the job completes when it reaches actual_duration_s.
    """

    spec: JobSpec
    profile: FunctionalProfile
    actual: np.ndarray
    grid_step: float
    position_s: float = 0.0
    status: str = "waiting"  # waiting | scheduled | running | completed | rejected
    last_checkpoint: Checkpoint | None = None
    first_start_s: float | None = None
    finish_s: float | None = None
    reexecuted_s: float = 0.0
    oom_strikes: int = 0
    subjob_seq: int = 0
    placement_seq: int = 0
    earliest_resume_s: float = 0.0  # migration delay gate (preempt baseline)
    demand_floor: np.ndarray | None = None  # observed-demand lower bound (online correction)

    @property
    def actual_duration_s(self) -> float:
        return (len(self.actual) - 1) * self.grid_step

    @property
    def done(self) -> bool:
        return self.position_s >= self.actual_duration_s - 1e-9

    @property
    def completed_fraction(self) -> float:
        if self.actual_duration_s <= 0:
            return 1.0
        return min(1.0, self.position_s / self.actual_duration_s)

    def fraction_at(self, position_s: float) -> float:
        if self.actual_duration_s <= 0:
            return 1.0
        return min(1.0, position_s / self.actual_duration_s)

    def next_subjob_id(self) -> str:
        sid = f"{self.spec.job_id}-s{self.subjob_seq}"
        self.subjob_seq += 1
        return sid

    def next_placement_id(self) -> str:
        pid = f"{self.spec.job_id}-p{self.placement_seq}"
        self.placement_seq += 1
        return pid

    def note_demand(self, start_idx: int, samples: np.ndarray) -> None:
        """Fold observed samples into the planning floor (online correction)."""
        end = start_idx + len(samples)
        if self.demand_floor is None or len(self.demand_floor) < end:
            grown = np.zeros(max(end, len(self.actual)))
            if self.demand_floor is not None:
                grown[: len(self.demand_floor)] = self.demand_floor
            self.demand_floor = grown
        self.demand_floor[start_idx:end] = np.maximum(
            self.demand_floor[start_idx:end], samples
        )


# ---------------------------------------------------------------------------
# Scenario files: one job per line, plus per-job ensemble manifests.
# ---------------------------------------------------------------------------

SCENARIO_HEADER = (
    "job_id,tenant,arrival_s,total_work_s,declared_peak_mb,priority,"
    "deadline_s,ckpt_mb,atomizable,ensemble_manifest_path"
)
_SCENARIO_COLS = SCENARIO_HEADER.split(",")
_TRUTH_COL = "truth_path"


def _fmtnum(x: float) -> str:
    return format(float(x), ".10g")


def write_scenario(
    path: str | Path,
    jobs: list[JobSpec],
    manifest_paths: dict[str, str],
    truth_paths: dict[str, str] | None = None,
) -> None:
    """Write a scenario file; manifest paths are stored as given (relative
    paths are resolved against the scenario file's directory on ingest)."""
    path = Path(path)
    header = SCENARIO_HEADER + ("," + _TRUTH_COL if truth_paths else "")
    rows = [header]
    for job in jobs:
        deadline = "none" if job.deadline_s is None else _fmtnum(job.deadline_s)
        row = ",".join(
            [
                job.job_id,
                job.tenant_id,
                _fmtnum(job.arrival_s),
                _fmtnum(job.total_work_s),
                _fmtnum(job.declared_peak_mb),
                str(job.priority),
                deadline,
                _fmtnum(job.checkpoint_size_mb),
                "1" if job.atomizable else "0",
                manifest_paths[job.job_id],
            ]
        )
        if truth_paths:
            row += "," + truth_paths.get(job.job_id, "")
        rows.append(row)
    path.write_text("\n".join(rows) + "\n")


def ingest_scenario(
    path: str | Path,
) -> tuple[list[JobSpec], dict[str, TrajectoryEnsemble], dict[str, np.ndarray]]:
    """Parse a scenario file.

    Returns (jobs, ensembles keyed by manifest path, explicit ground-truth
    trajectories keyed by job id). Jobs referencing one manifest share one
    ensemble object. Malformed rows raise ScenarioError with a line number.
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario not found: {path}")
    base = path.parent
    lines = path.read_text().splitlines()
    if not lines:
        raise ScenarioError("empty file, header required", line=1)
    header = [h.strip() for h in lines[0].split(",")]
    has_truth = header == _SCENARIO_COLS + [_TRUTH_COL]
    if not has_truth and header != _SCENARIO_COLS:
        raise ScenarioError(f"bad header, expected '{SCENARIO_HEADER}'", line=1)
    jobs: list[JobSpec] = []
    ensembles: dict[str, TrajectoryEnsemble] = {}
    truths: dict[str, np.ndarray] = {}
    seen_ids: set[str] = set()
    for ln, raw in enumerate(lines[1:], start=2):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in raw.split(",")]
        expected = len(_SCENARIO_COLS) + (1 if has_truth else 0)
        if len(parts) != expected:
            raise ScenarioError(f"expected {expected} columns, got {len(parts)}", line=ln)
        try:
            job_id, tenant = parts[0], parts[1]
            arrival = float(parts[2])
            total_work = float(parts[3])
            declared_peak = float(parts[4])
            priority = int(parts[5])
            deadline = None if parts[6].lower() == "none" else float(parts[6])
            ckpt = float(parts[7])
            if parts[8] not in ("0", "1"):
                raise ValueError(f"atomizable must be 0 or 1, got {parts[8]!r}")
            atomizable = parts[8] == "1"
        except ValueError as exc:
            raise ScenarioError(str(exc), line=ln) from exc
        if job_id in seen_ids:
            raise ScenarioError(f"duplicate job id {job_id}", line=ln)
        seen_ids.add(job_id)
        manifest_rel = parts[9]
        if manifest_rel not in ensembles:
            manifest_path = Path(manifest_rel)
            if not manifest_path.is_absolute():
                manifest_path = base / manifest_path
            if not manifest_path.exists():
                raise ScenarioError(f"ensemble manifest not found: {manifest_rel}", line=ln)
            ensembles[manifest_rel] = load_ensemble(manifest_path)
        try:
            job = JobSpec(
                job_id=job_id,
                tenant_id=tenant,
                arrival_s=arrival,
                total_work_s=total_work,
                declared_peak_mb=declared_peak,
                priority=priority,
                deadline_s=deadline,
                checkpoint_size_mb=ckpt,
                atomizable=atomizable,
                ensemble_key=manifest_rel,
            )
        except ScenarioError as exc:
            raise ScenarioError(str(exc), line=ln) from exc
        if has_truth and parts[10]:
            truth_path = Path(parts[10])
            if not truth_path.is_absolute():
                truth_path = base / truth_path
            if not truth_path.exists():
                raise ScenarioError(f"ground-truth run not found: {parts[10]}", line=ln)
            from .profiles import read_trajectory

            samples, step = read_trajectory(truth_path)
            if not math.isclose(step, ensembles[manifest_rel].grid_step, rel_tol=1e-9):
                raise ScenarioError("ground-truth grid step differs from ensemble", line=ln)
            truths[job_id] = samples
        jobs.append(job)
    return jobs, ensembles, truths

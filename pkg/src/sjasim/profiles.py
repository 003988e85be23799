"""Probabilistic memory profiles estimated from ensembles of historical runs.

A job's memory demand is modeled as a function of job-relative time on a
uniform grid. From an ensemble of recorded runs we build pointwise upper
quantile envelopes, admission checks (pointwise-envelope and joint-window),
runtime distributions for deadline screening, and nearest-neighbor
continuation forecasts for partially observed runs.

Quantile rule used throughout: nearest-rank, i.e. the ceil(q * n)-th order
statistic of the n values supported at a grid point. No interpolation. Runs
shorter than t contribute nothing at t; the per-point support count is kept
on the profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ProfileError",
    "UnsupportedQuery",
    "TrajectoryEnsemble",
    "FunctionalProfile",
    "RiskParams",
    "EnvelopePeak",
    "AdmissionDecision",
    "Continuation",
    "build_profile",
    "single_run_profile",
    "envelope_peak",
    "memory_admissible",
    "deadline_admissible",
    "predict_continuation",
    "refresh_profile",
    "write_trajectory",
    "read_trajectory",
    "write_ensemble",
    "load_ensemble",
]

RESOURCE_MEMORY = "memory"


class ProfileError(ValueError):
    """Invalid profile construction or query."""


class UnsupportedQuery(ProfileError):
    """Query outside what the profile can answer (e.g. unknown resource kind)."""


def _fmt6(x: float) -> str:
    # 6 significant digits; the on-disk trajectory format round-trips at
    # this precision (write -> read -> write is byte-identical).
    return format(float(x), ".6g")


@dataclass
class TrajectoryEnsemble:
    """A set of recorded runs of one job type on a shared uniform time grid.

    runs[i][k] is the memory demand in MB at job-relative time k * grid_step
    of run i. Runs may have different lengths; run i covers
    [0, (len(runs[i]) - 1) * grid_step].
    """

    grid_step: float
    runs: list[np.ndarray]
    resource_kind: str = RESOURCE_MEMORY

    def __post_init__(self) -> None:
        if self.resource_kind != RESOURCE_MEMORY:
            raise UnsupportedQuery(f"unsupported resource kind: {self.resource_kind!r}")
        if not self.grid_step > 0:
            raise ProfileError("grid_step must be positive")
        if not self.runs:
            raise ProfileError("ensemble has no runs")
        coerced = []
        for i, run in enumerate(self.runs):
            arr = np.asarray(run, dtype=float)
            if arr.ndim != 1 or arr.size == 0:
                raise ProfileError(f"run {i} must be a non-empty 1-d sample array")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ProfileError(f"run {i} has negative or non-finite samples")
            coerced.append(arr)
        self.runs = coerced
        self._padded: np.ndarray | None = None

    @property
    def n_runs(self) -> int:
        return len(self.runs)

    @property
    def max_len(self) -> int:
        return max(len(r) for r in self.runs)

    @property
    def run_durations(self) -> np.ndarray:
        return np.array([(len(r) - 1) * self.grid_step for r in self.runs])

    def padded_matrix(self) -> np.ndarray:
        """(n_runs, max_len) matrix, NaN where a run has already ended."""
        if self._padded is None or self._padded.shape[0] != self.n_runs:
            m = np.full((self.n_runs, self.max_len), np.nan)
            for i, run in enumerate(self.runs):
                m[i, : len(run)] = run
            self._padded = m
        return self._padded


def nearest_rank(sorted_values: np.ndarray, q: float, n: int) -> float:
    """ceil(q * n)-th order statistic of the first n entries (ascending)."""
    if n <= 0:
        raise ProfileError("nearest_rank needs at least one supported value")
    rank = max(1, math.ceil(q * n))
    return float(sorted_values[min(rank, n) - 1])


def _column_quantiles(padded: np.ndarray, q: float) -> np.ndarray:
    """Pointwise nearest-rank q-quantile per grid column, alive runs only."""
    sorted_cols = np.sort(padded, axis=0)  # NaN sorts to the end
    support = np.sum(~np.isnan(padded), axis=0)
    ranks = np.maximum(1, np.ceil(q * support).astype(int))
    ranks = np.minimum(ranks, np.maximum(support, 1))
    out = sorted_cols[ranks - 1, np.arange(padded.shape[1])]
    return np.asarray(out, dtype=float)


@dataclass
class FunctionalProfile:
    """Time-indexed statistical summary of a trajectory ensemble."""

    grid_step: float
    horizon: float
    median_curve: np.ndarray
    envelope_cache: dict[float, np.ndarray]
    runtime_samples: np.ndarray
    support: np.ndarray
    source: TrajectoryEnsemble | None = None

    @property
    def n_points(self) -> int:
        return len(self.median_curve)

    def envelope(self, eps: float) -> np.ndarray:
        """Pointwise (1 - eps)-quantile curve; computed on demand and cached."""
        _check_eps(eps)
        key = float(eps)
        if key not in self.envelope_cache:
            if self.source is None:
                raise UnsupportedQuery(
                    f"eps={eps} not cached and no source ensemble retained"
                )
            self.envelope_cache[key] = _column_quantiles(
                self.source.padded_matrix(), 1.0 - key
            )
        return self.envelope_cache[key]


@dataclass(frozen=True)
class RiskParams:
    """Risk tolerances: eps for memory exceedance, alpha_t for deadline miss."""

    eps: float = 0.05
    alpha_t: float = 0.05

    def __post_init__(self) -> None:
        _check_eps(self.eps)
        if not 0.0 < self.alpha_t < 1.0:
            raise ProfileError("alpha_t must lie in (0, 1)")


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise ProfileError("eps must lie in (0, 1)")


def build_profile(
    ensemble: TrajectoryEnsemble, eps_levels: tuple[float, ...] = (0.05,)
) -> FunctionalProfile:
    """Build a profile with the median curve and envelopes at eps_levels.

    Requires at least two runs; a single run carries no spread information
    (see single_run_profile for the inflation fallback).
    """
    if ensemble.n_runs < 2:
        raise ProfileError("profile estimation needs at least 2 runs")
    for eps in eps_levels:
        _check_eps(eps)
    padded = ensemble.padded_matrix()
    support = np.sum(~np.isnan(padded), axis=0)
    cache = {float(e): _column_quantiles(padded, 1.0 - e) for e in eps_levels}
    return FunctionalProfile(
        grid_step=ensemble.grid_step,
        horizon=float(ensemble.run_durations.max()),
        median_curve=_column_quantiles(padded, 0.5),
        envelope_cache=cache,
        runtime_samples=np.sort(ensemble.run_durations),
        support=support,
        source=ensemble,
    )


def single_run_profile(
    run: np.ndarray,
    grid_step: float,
    inflation: float = 1.10,
    eps_levels: tuple[float, ...] = (0.05,),
) -> FunctionalProfile:
    """Deterministic fallback profile from a single run.

    Every envelope is the run scaled by `inflation`; the median is the run
    itself. Used when an ensemble has only one member, which build_profile
    rejects.
    """
    ensemble = TrajectoryEnsemble(grid_step=grid_step, runs=[np.asarray(run, float)])
    if inflation < 1.0:
        raise ProfileError("inflation must be >= 1")
    base = ensemble.runs[0]
    cache = {float(e): base * inflation for e in eps_levels}
    return FunctionalProfile(
        grid_step=grid_step,
        horizon=float((len(base) - 1) * grid_step),
        median_curve=base.copy(),
        envelope_cache=cache,
        runtime_samples=ensemble.run_durations,
        support=np.ones(len(base), dtype=int),
        source=ensemble,
    )


def grid_indices(
    window: tuple[float, float], grid_step: float, n_points: int
) -> tuple[int, int, bool]:
    """Grid index range [lo, hi] of the points a time window touches.

    lo snaps back to the grid point at or before `start`; hi is the last
    grid point at or before `end`. Returns (lo, hi, truncated); truncated
    is True when the window reaches past the last supported grid point and
    was clamped to it.
    """
    start, end = window
    if end < start:
        raise ProfileError("window end precedes start")
    if start < 0:
        raise ProfileError("window start is negative")
    lo = int(math.floor(start / grid_step + 1e-9))
    hi = int(math.floor(end / grid_step + 1e-9))
    truncated = False
    if lo > n_points - 1:
        lo = n_points - 1
        truncated = True
    if hi > n_points - 1:
        hi = n_points - 1
        truncated = True
    hi = max(hi, lo)
    return lo, hi, truncated


@dataclass(frozen=True)
class EnvelopePeak:
    value_mb: float
    truncated: bool


def envelope_peak(
    profile: FunctionalProfile, eps: float, window: tuple[float, float]
) -> EnvelopePeak:
    """Max of the (1 - eps) envelope over the grid points meeting `window`.

    Windows reaching beyond the profile horizon are clamped to it and the
    result is flagged truncated.
    """
    curve = profile.envelope(eps)
    lo, hi, truncated = grid_indices(window, profile.grid_step, profile.n_points)
    return EnvelopePeak(float(curve[lo : hi + 1].max()), truncated)


@dataclass(frozen=True)
class AdmissionDecision:
    admissible: bool
    probability: float
    method: str
    truncated: bool = False


def memory_admissible(
    profile: FunctionalProfile,
    capacity_mb: float,
    window: tuple[float, float],
    eps: float,
    method: str = "joint",
) -> AdmissionDecision:
    """Decide whether running over `window` at capacity_mb meets risk eps.

    method="joint" (default for admission): the estimated probability is the
    fraction of source runs whose maximum over the window stays at or below
    capacity; runs that end before the window contribute a success. Admit
    when that fraction is at least 1 - eps.

    method="envelope": admit when the pointwise envelope peak over the window
    is at or below capacity. This bounds exceedance pointwise at every grid
    point but not jointly over the window, so it is the more permissive
    check; the reported probability is the worst pointwise survival fraction
    over the window.
    """
    _check_eps(eps)
    if method == "envelope":
        peak = envelope_peak(profile, eps, window)
        verdict = peak.value_mb <= capacity_mb
        prob = _pointwise_survival(profile, capacity_mb, window)
        return AdmissionDecision(verdict, prob, "envelope", peak.truncated)
    if method != "joint":
        raise UnsupportedQuery(f"unknown admission method: {method!r}")
    if profile.source is None:
        raise UnsupportedQuery("joint admission needs the source ensemble")
    padded = profile.source.padded_matrix()
    lo, hi, truncated = grid_indices(window, profile.grid_step, profile.n_points)
    segment = padded[:, lo : hi + 1]
    # A run with no samples in the window has already finished: success.
    maxes = np.where(np.isnan(segment), -np.inf, segment).max(axis=1)
    prob = float(np.mean(maxes <= capacity_mb))
    return AdmissionDecision(prob >= 1.0 - eps, prob, "joint", truncated)


def _pointwise_survival(
    profile: FunctionalProfile, capacity_mb: float, window: tuple[float, float]
) -> float:
    if profile.source is None:
        return float("nan")
    padded = profile.source.padded_matrix()
    lo, hi, _ = grid_indices(window, profile.grid_step, profile.n_points)
    segment = padded[:, lo : hi + 1]
    alive = ~np.isnan(segment)
    # Runs already finished count as under-capacity, same as the joint rule.
    under = np.where(alive, segment <= capacity_mb, True)
    frac = under.sum(axis=0) / padded.shape[0]
    return float(frac.min())


def deadline_admissible(
    profile: FunctionalProfile,
    remaining_work_fraction: float,
    deadline_from_now: float,
    alpha_t: float,
) -> AdmissionDecision:
    """Screen a deadline: fraction of scaled runtime samples within it.

    The remaining-runtime model is runtime_sample * remaining_work_fraction;
    admit when at least 1 - alpha_t of the samples finish by the deadline.
    A non-positive deadline admits nothing unless samples are themselves 0.
    """
    if not 0.0 < alpha_t < 1.0:
        raise ProfileError("alpha_t must lie in (0, 1)")
    if not 0.0 <= remaining_work_fraction <= 1.0:
        raise ProfileError("remaining_work_fraction must lie in [0, 1]")
    scaled = profile.runtime_samples * remaining_work_fraction
    prob = float(np.mean(scaled <= deadline_from_now))
    return AdmissionDecision(prob >= 1.0 - alpha_t, prob, "deadline")


@dataclass(frozen=True)
class Continuation:
    """Forecast for the remainder of a partially observed run."""

    grid_step: float
    start_index: int          # first forecast sample = this grid index
    median: np.ndarray
    band_low: np.ndarray      # pointwise 25th percentile of neighbor suffixes
    band_high: np.ndarray     # pointwise 75th percentile
    neighbor_indices: tuple[int, ...]

    @property
    def empty(self) -> bool:
        return self.median.size == 0


def predict_continuation(
    profile: FunctionalProfile, observed_prefix: np.ndarray, k: int = 5
) -> Continuation:
    """Forecast the suffix from the k historical runs nearest the prefix.

    Distance is RMS over the overlapping grid (runs shorter than the prefix
    compare over their own full length). The forecast is the pointwise
    median of the k neighbor suffixes with a 25th-75th percentile band.
    """
    if profile.source is None:
        raise UnsupportedQuery("continuation needs the source ensemble")
    prefix = np.asarray(observed_prefix, dtype=float)
    if prefix.ndim != 1 or prefix.size == 0:
        raise ProfileError("observed_prefix must be a non-empty 1-d array")
    runs = profile.source.runs
    if not 1 <= k <= len(runs):
        raise ProfileError(f"k must lie in [1, {len(runs)}]")
    p = len(prefix)
    dists = []
    for idx, run in enumerate(runs):
        overlap = min(p, len(run))
        d = float(np.sqrt(np.mean((run[:overlap] - prefix[:overlap]) ** 2)))
        dists.append((d, idx))
    dists.sort()
    chosen = tuple(idx for _, idx in dists[:k])
    suffixes = [runs[i][p:] for i in chosen]
    max_len = max((len(s) for s in suffixes), default=0)
    if max_len == 0:
        empty = np.array([])
        return Continuation(profile.grid_step, p, empty, empty.copy(), empty.copy(), chosen)
    padded = np.full((len(suffixes), max_len), np.nan)
    for i, s in enumerate(suffixes):
        padded[i, : len(s)] = s
    return Continuation(
        grid_step=profile.grid_step,
        start_index=p,
        median=_column_quantiles(padded, 0.5),
        band_low=_column_quantiles(padded, 0.25),
        band_high=_column_quantiles(padded, 0.75),
        neighbor_indices=chosen,
    )


def refresh_profile(
    profile: FunctionalProfile, completed_run: np.ndarray
) -> FunctionalProfile:
    """Rebuild the profile over the source runs plus one new completed run."""
    if profile.source is None:
        raise UnsupportedQuery("refresh needs the source ensemble")
    run = np.asarray(completed_run, dtype=float)
    merged = TrajectoryEnsemble(
        grid_step=profile.grid_step,
        runs=list(profile.source.runs) + [run],
        resource_kind=profile.source.resource_kind,
    )
    levels = tuple(sorted(profile.envelope_cache.keys()))
    if not levels:
        levels = (0.05,)
    return build_profile(merged, levels)


# ---------------------------------------------------------------------------
# On-disk formats: one CSV per run, a manifest listing run files per ensemble.
# ---------------------------------------------------------------------------

TRAJECTORY_HEADER = "time_s,mem_mb"


def write_trajectory(path: str | Path, samples: np.ndarray, grid_step: float) -> None:
    """Write one run as `time_s,mem_mb` rows at 6 significant digits."""
    samples = np.asarray(samples, dtype=float)
    lines = [TRAJECTORY_HEADER]
    for i, v in enumerate(samples):
        lines.append(f"{_fmt6(i * grid_step)},{_fmt6(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path: str | Path) -> tuple[np.ndarray, float]:
    """Read one run file; returns (samples, grid_step)."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != TRAJECTORY_HEADER:
        raise ProfileError(f"{path}: missing '{TRAJECTORY_HEADER}' header")
    times, values = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ProfileError(f"{path}:{ln}: expected two comma-separated columns")
        try:
            times.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise ProfileError(f"{path}:{ln}: {exc}") from exc
    if not values:
        raise ProfileError(f"{path}: no samples")
    if len(times) == 1:
        return np.array(values), 1.0
    diffs = np.diff(times)
    step = float(diffs[0])
    if step <= 0 or not np.allclose(diffs, step, rtol=1e-6, atol=1e-9):
        raise ProfileError(f"{path}: time column is not a uniform grid")
    return np.array(values), step


def write_ensemble(
    directory: str | Path,
    ensemble: TrajectoryEnsemble,
    manifest_name: str = "manifest.txt",
) -> Path:
    """Write all runs plus a manifest into `directory`; returns manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, run in enumerate(ensemble.runs):
        name = f"run_{i:04d}.csv"
        write_trajectory(directory / name, run, ensemble.grid_step)
        names.append(name)
    manifest = directory / manifest_name
    manifest.write_text("\n".join(names) + "\n")
    return manifest


def load_ensemble(manifest_path: str | Path) -> TrajectoryEnsemble:
    """Load an ensemble from a manifest of run-file paths (one per line).

    Paths are resolved relative to the manifest's directory; blank lines and
    `#` comments are skipped. All runs must share one grid step.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise ProfileError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    runs: list[np.ndarray] = []
    grid_step: float | None = None
    for raw in manifest_path.read_text().splitlines():
        entry = raw.strip()
        if not entry or entry.startswith("#"):
            continue
        samples, step = read_trajectory(base / entry)
        if grid_step is None:
            grid_step = step
        elif not math.isclose(step, grid_step, rel_tol=1e-9):
            raise ProfileError(
                f"{manifest_path}: run {entry} grid step {step} != {grid_step}"
            )
        runs.append(samples)
    if not runs:
        raise ProfileError(f"{manifest_path}: manifest lists no runs")
    assert grid_step is not None
    return TrajectoryEnsemble(grid_step=grid_step, runs=runs)

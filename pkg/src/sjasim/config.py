"""Run configuration: defaults, flat key-value files, flag overrides.

Config files are plain text, one `key = value` pair per line, with `#`
comments and blank lines ignored. Keys carry a section prefix
(`risk.eps`, `cluster.gpus`, `policy.budget.<tenant>`, ...); unknown keys
are rejected. Precedence is defaults < file < explicit overrides.

resolve() renders the fully resolved state, one sorted key per line.
Loading that text back yields an identical configuration, so the echo
written next to a run's artifacts is sufficient to reproduce the run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .baselines import BaselineParams
from .cluster import SliceCatalog
from .policies import POLICY_KINDS, GrantPolicy
from .simcore import SCHEDULERS, SimConfig

__all__ = [
    "ConfigError",
    "RunConfig",
    "normalize_scheduler",
    "set_key",
    "parse_config_text",
    "load_config",
    "resolve",
]


class ConfigError(ValueError):
    """Bad key, bad value, or a value outside its documented domain."""


# Accepted spellings on the command line / config file -> engine name.
_SCHEDULER_ALIASES = {
    "sja": "sja",
    "first-fit": "first_fit",
    "first_fit": "first_fit",
    "best-fit": "best_fit",
    "best_fit": "best_fit",
    "moldable": "moldable",
    "preempt": "preempt_migrate",
    "preempt-migrate": "preempt_migrate",
    "preempt_migrate": "preempt_migrate",
}


def normalize_scheduler(name: str) -> str:
    try:
        return _SCHEDULER_ALIASES[name.strip().lower()]
    except KeyError:
        raise ConfigError(
            f"unknown scheduler {name!r}; choose from sja, first-fit, best-fit, "
            "moldable, preempt"
        ) from None


@dataclass
class RunConfig:
    """Everything a run needs beyond the scenario file's own content."""

    scenario_path: str = ""
    scheduler: str = "sja"
    seeds: tuple[int, ...] = (0,)
    output_dir: str = ""
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
    policy_kind: str = "fifo"
    cost_rate: float = 1.0
    token_budgets: dict[str, float] = field(default_factory=dict)
    gpus: int = 1
    slices_per_gpu: tuple[int, ...] = (20480, 10240, 5120, 5120)
    catalog: tuple[int, ...] = (5120, 10240, 20480, 40960)
    failure_rate_per_hour: float = 0.0
    online_correction: bool = True
    max_oom_retries: int = 3
    n_historical_runs: int | None = None
    single_run_inflation: float = 1.10
    max_wait_s: float = math.inf
    sim_time_cap_s: float = 7 * 86400.0
    ckpt_interval_s: float = 600.0
    migrate_bandwidth_mb_s: float = 1024.0
    migrate_fixed_overhead_s: float = 5.0
    speedup_table: dict[int, float] = field(default_factory=dict)

    def validate(self) -> None:
        self.scheduler = normalize_scheduler(self.scheduler)
        assert self.scheduler in SCHEDULERS
        if not self.seeds:
            raise ConfigError("run.seeds must name at least one seed")
        if not 0.0 < self.eps < 1.0:
            raise ConfigError("risk.eps must lie in (0, 1)")
        if not 0.0 < self.alpha_t < 1.0:
            raise ConfigError("risk.alpha_t must lie in (0, 1)")
        if self.policy_kind not in POLICY_KINDS:
            raise ConfigError(
                f"unknown policy.kind {self.policy_kind!r}; choose from {POLICY_KINDS}"
            )
        try:
            self.to_sim_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_sim_config(self) -> SimConfig:
        return SimConfig(
            eps=self.eps,
            alpha_t=self.alpha_t,
            tau_min_s=self.tau_min_s,
            tau_max_s=self.tau_max_s,
            smoothing_window_s=self.smoothing_window_s,
            hysteresis_delta=self.hysteresis_delta,
            lookahead_s=self.lookahead_s,
            round_cadence_s=self.round_cadence_s,
            offer_ttl_s=self.offer_ttl_s,
            max_concurrent_subjobs_per_job=self.max_concurrent_subjobs_per_job,
            policy=GrantPolicy(
                kind=self.policy_kind,
                cost_rate=self.cost_rate,
                token_budgets=dict(self.token_budgets),
            ),
            gpus=self.gpus,
            slices_per_gpu=tuple(self.slices_per_gpu),
            catalog=SliceCatalog(tuple(self.catalog)),
            failure_rate_per_hour=self.failure_rate_per_hour,
            online_correction=self.online_correction,
            max_oom_retries=self.max_oom_retries,
            n_historical_runs=self.n_historical_runs,
            single_run_inflation=self.single_run_inflation,
            max_wait_s=self.max_wait_s,
            sim_time_cap_s=self.sim_time_cap_s,
            baseline=BaselineParams(
                migrate_bandwidth_mb_s=self.migrate_bandwidth_mb_s,
                migrate_fixed_overhead_s=self.migrate_fixed_overhead_s,
                ckpt_interval_s=self.ckpt_interval_s,
                speedup_table=dict(self.speedup_table),
            ),
        )


# --- value codecs -----------------------------------------------------------


def _parse_float(raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"not a number: {raw!r}") from None
    if math.isnan(v):
        raise ConfigError("nan is not a valid value")
    return v


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"not an integer: {raw!r}") from None


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "on", "1", "yes"):
        return True
    if low in ("false", "off", "0", "no"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def _parse_int_tuple(raw: str) -> tuple[int, ...]:
    parts = [p for p in (s.strip() for s in raw.split(",")) if p]
    if not parts:
        raise ConfigError("expected a comma-separated list of integers")
    return tuple(_parse_int(p) for p in parts)


def _parse_opt_int(raw: str) -> int | None:
    return None if raw.strip().lower() == "none" else _parse_int(raw)


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt_bool(v: bool) -> str:
    return "true" if v else "false"


def _fmt_int_tuple(v: tuple[int, ...]) -> str:
    return ",".join(str(x) for x in v)


# key -> (attribute, parse, format)
_KEYS: dict[str, tuple[str, object, object]] = {
    "run.scenario": ("scenario_path", str.strip, str),
    "run.scheduler": ("scheduler", lambda r: normalize_scheduler(r), str),
    "run.seeds": ("seeds", _parse_int_tuple, _fmt_int_tuple),
    "run.output_dir": ("output_dir", str.strip, str),
    "risk.eps": ("eps", _parse_float, _fmt_float),
    "risk.alpha_t": ("alpha_t", _parse_float, _fmt_float),
    "segmentation.tau_min_s": ("tau_min_s", _parse_float, _fmt_float),
    "segmentation.tau_max_s": ("tau_max_s", _parse_float, _fmt_float),
    "segmentation.smoothing_window_s": ("smoothing_window_s", _parse_float, _fmt_float),
    "segmentation.hysteresis_delta": ("hysteresis_delta", _parse_float, _fmt_float),
    "protocol.lookahead_s": ("lookahead_s", _parse_float, _fmt_float),
    "protocol.round_cadence_s": ("round_cadence_s", _parse_float, _fmt_float),
    "protocol.offer_ttl_s": ("offer_ttl_s", _parse_float, _fmt_float),
    "protocol.max_concurrent_subjobs_per_job": (
        "max_concurrent_subjobs_per_job", _parse_int, str,
    ),
    "policy.kind": ("policy_kind", str.strip, str),
    "policy.cost_rate": ("cost_rate", _parse_float, _fmt_float),
    "cluster.gpus": ("gpus", _parse_int, str),
    "cluster.slices_per_gpu": ("slices_per_gpu", _parse_int_tuple, _fmt_int_tuple),
    "cluster.catalog": ("catalog", _parse_int_tuple, _fmt_int_tuple),
    "engine.failure_rate_per_hour": ("failure_rate_per_hour", _parse_float, _fmt_float),
    "engine.online_correction": ("online_correction", _parse_bool, _fmt_bool),
    "engine.max_oom_retries": ("max_oom_retries", _parse_int, str),
    "engine.n_historical_runs": (
        "n_historical_runs", _parse_opt_int, lambda v: "none" if v is None else str(v),
    ),
    "engine.single_run_inflation": ("single_run_inflation", _parse_float, _fmt_float),
    "engine.max_wait_s": ("max_wait_s", _parse_float, _fmt_float),
    "engine.sim_time_cap_s": ("sim_time_cap_s", _parse_float, _fmt_float),
    "baseline.ckpt_interval_s": ("ckpt_interval_s", _parse_float, _fmt_float),
    "baseline.migrate_bandwidth_mb_s": (
        "migrate_bandwidth_mb_s", _parse_float, _fmt_float,
    ),
    "baseline.migrate_fixed_overhead_s": (
        "migrate_fixed_overhead_s", _parse_float, _fmt_float,
    ),
}

_BUDGET_PREFIX = "policy.budget."
_SPEEDUP_PREFIX = "baseline.speedup."


def set_key(cfg: RunConfig, key: str, raw: str) -> None:
    """Assign one dotted key; raises ConfigError for unknown keys/values."""
    key = key.strip()
    if key.startswith(_BUDGET_PREFIX):
        tenant = key[len(_BUDGET_PREFIX):]
        if not tenant:
            raise ConfigError("policy.budget. needs a tenant name")
        cfg.token_budgets[tenant] = _parse_float(raw)
        return
    if key.startswith(_SPEEDUP_PREFIX):
        cap = _parse_int(key[len(_SPEEDUP_PREFIX):])
        cfg.speedup_table[cap] = _parse_float(raw)
        return
    try:
        attr, parse, _fmt = _KEYS[key]
    except KeyError:
        raise ConfigError(f"unknown config key {key!r}") from None
    setattr(cfg, attr, parse(raw))


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {ln}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        try:
            set_key(cfg, key, raw.strip())
        except ConfigError as exc:
            raise ConfigError(f"line {ln}: {exc}") from None
    return cfg


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), base)


def resolve(cfg: RunConfig) -> str:
    """Render the fully resolved configuration, one sorted key per line.

    Parsing the result back produces an equal RunConfig, so the echo file
    alone pins down a run.
    """
    entries: dict[str, str] = {}
    for key, (attr, _parse, fmt) in _KEYS.items():
        entries[key] = fmt(getattr(cfg, attr))
    for tenant, budget in cfg.token_budgets.items():
        entries[f"{_BUDGET_PREFIX}{tenant}"] = _fmt_float(budget)
    for cap, mult in cfg.speedup_table.items():
        entries[f"{_SPEEDUP_PREFIX}{cap}"] = _fmt_float(mult)
    lines = [f"{key} = {entries[key]}" for key in sorted(entries)]
    return "\n".join(lines) + "\n"


def _unused_field_check() -> None:
    # Every RunConfig field must be reachable from some config key, so the
    # resolved echo really does pin the whole run.
    mapped = {attr for attr, _p, _f in _KEYS.values()} | {"token_budgets", "speedup_table"}
    missing = [f.name for f in fields(RunConfig) if f.name not in mapped]
    assert not missing, f"config keys missing for: {missing}"


_unused_field_check()

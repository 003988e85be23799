"""Configuration parsing, overrides, and echo round-trips."""
import math

import pytest

from sjasim.config import (
    ConfigError,
    RunConfig,
    load_config,
    normalize_scheduler,
    parse_config_text,
    resolve,
    set_key,
)


class TestSchedulerAliases:
    def test_dash_and_underscore_spellings(self):
        assert normalize_scheduler("sja") == "sja"
        assert normalize_scheduler("first-fit") == "first_fit"
        assert normalize_scheduler("first_fit") == "first_fit"
        assert normalize_scheduler("Preempt") == "preempt_migrate"
        assert normalize_scheduler("preempt-migrate") == "preempt_migrate"

    def test_unknown_scheduler(self):
        with pytest.raises(ConfigError):
            normalize_scheduler("round-robin")


class TestSetKey:
    def test_typed_values(self):
        cfg = RunConfig()
        set_key(cfg, "risk.eps", "0.1")
        set_key(cfg, "cluster.gpus", "4")
        set_key(cfg, "cluster.slices_per_gpu", "20480, 10240")
        set_key(cfg, "engine.online_correction", "off")
        set_key(cfg, "engine.n_historical_runs", "none")
        set_key(cfg, "run.seeds", "0,1,2")
        assert cfg.eps == 0.1 and cfg.gpus == 4
        assert cfg.slices_per_gpu == (20480, 10240)
        assert cfg.online_correction is False
        assert cfg.n_historical_runs is None
        assert cfg.seeds == (0, 1, 2)

    def test_dynamic_budget_and_speedup_keys(self):
        cfg = RunConfig()
        set_key(cfg, "policy.budget.acme", "20000")
        set_key(cfg, "baseline.speedup.5120", "1.15")
        assert cfg.token_budgets == {"acme": 20000.0}
        assert cfg.speedup_table == {5120: 1.15}

    def test_unknown_key_rejected(self):
        cfg = RunConfig()
        with pytest.raises(ConfigError, match="unknown config key"):
            set_key(cfg, "risk.epsilon", "0.1")
        with pytest.raises(ConfigError):
            set_key(cfg, "policy.budget.", "5")

    def test_bad_values_rejected(self):
        cfg = RunConfig()
        with pytest.raises(ConfigError):
            set_key(cfg, "risk.eps", "plenty")
        with pytest.raises(ConfigError):
            set_key(cfg, "risk.eps", "nan")
        with pytest.raises(ConfigError):
            set_key(cfg, "cluster.gpus", "2.5")
        with pytest.raises(ConfigError):
            set_key(cfg, "engine.online_correction", "mostly")


class TestParseText:
    def test_comments_blanks_and_precedence(self):
        text = """
        # run shape
        risk.eps = 0.08

        cluster.gpus = 2
        risk.eps = 0.12
        """
        cfg = parse_config_text(text)
        assert cfg.eps == 0.12  # later lines win
        assert cfg.gpus == 2

    def test_line_numbers_in_errors(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("risk.eps = 0.1\nwhat even\n")
        with pytest.raises(ConfigError, match="line 3"):
            parse_config_text("# a\n\nrisk.eps = high\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.conf")


class TestValidate:
    def test_domain_checks(self):
        cfg = RunConfig()
        cfg.eps = 1.5
        with pytest.raises(ConfigError, match="risk.eps"):
            cfg.validate()
        cfg = RunConfig()
        cfg.seeds = ()
        with pytest.raises(ConfigError, match="seeds"):
            cfg.validate()
        cfg = RunConfig()
        cfg.policy_kind = "auction"
        with pytest.raises(ConfigError, match="policy.kind"):
            cfg.validate()
        cfg = RunConfig()
        cfg.tau_min_s = 900.0
        cfg.tau_max_s = 300.0  # SimConfig construction catches this
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_scheduler_normalized_in_place(self):
        cfg = RunConfig()
        cfg.scheduler = "first-fit"
        cfg.validate()
        assert cfg.scheduler == "first_fit"


class TestResolveRoundTrip:
    def test_echo_reparses_to_equal_config(self):
        cfg = RunConfig()
        set_key(cfg, "risk.eps", "0.75e-1")
        set_key(cfg, "segmentation.tau_min_s", "240")
        set_key(cfg, "policy.kind", "fair_tokens")
        set_key(cfg, "policy.budget.acme", "20000")
        set_key(cfg, "policy.budget.zen", "15000.5")
        set_key(cfg, "baseline.speedup.10240", "1.08")
        set_key(cfg, "engine.max_wait_s", "inf")
        echo = resolve(cfg)
        back = parse_config_text(echo)
        assert back == cfg
        # echo of the echo is byte-identical (canonical form reached)
        assert resolve(back) == echo

    def test_echo_is_sorted_and_complete(self):
        echo = resolve(RunConfig())
        keys = [line.split(" = ")[0] for line in echo.strip().splitlines()]
        assert keys == sorted(keys)
        assert "risk.eps" in keys and "cluster.catalog" in keys
        assert echo.endswith("\n")

    def test_float_repr_exact(self):
        cfg = RunConfig()
        set_key(cfg, "risk.eps", "0.1")
        echo = resolve(cfg)
        back = parse_config_text(echo)
        assert back.eps == cfg.eps  # no precision lost through the echo

    def test_to_sim_config_carries_everything(self):
        cfg = RunConfig()
        set_key(cfg, "policy.kind", "fair_tokens")
        set_key(cfg, "policy.budget.acme", "100")
        set_key(cfg, "baseline.speedup.5120", "1.15")
        set_key(cfg, "cluster.catalog", "5120,10240,20480")
        sim = cfg.to_sim_config()
        assert sim.policy.kind == "fair_tokens"
        assert sim.policy.token_budgets == {"acme": 100.0}
        assert sim.baseline.speedup_table == {5120: 1.15}
        assert sim.catalog.capacities_mb == (5120, 10240, 20480)

"""Grant policy selection and fairness accounting."""
import numpy as np
import pytest

from sjasim.cluster import ExecutionWindow
from sjasim.policies import (
    GrantPolicy,
    SelectionContext,
    TenantLedger,
    jain_index,
    offer_cost_tokens,
    select,
)
from sjasim.profiles import TrajectoryEnsemble, build_profile
from sjasim.protocol import InterestSignal, Offer


def offer(capacity=10240, duration=600.0):
    return Offer("offer-000000", ExecutionWindow("g0s0", capacity, 0.0, duration), 0.0, 60.0)


def interests(*job_ids):
    return [InterestSignal("offer-000000", j, "interest") for j in job_ids]


def flat_profile(runtime_steps=31, level=1000.0, n_runs=8):
    runs = [np.full(runtime_steps, level) for _ in range(n_runs)]
    return build_profile(TrajectoryEnsemble(grid_step=60.0, runs=runs), eps_levels=(0.05,))


def ctx(arrivals=None, priorities=None, deadlines=None, tenants=None,
        remaining=None, profiles=None, now=0.0, alpha_t=0.05):
    jobs = arrivals or {}
    return SelectionContext(
        now=now,
        arrivals=jobs,
        priorities=priorities or {j: 0 for j in jobs},
        deadlines=deadlines or {j: None for j in jobs},
        tenants=tenants or {j: "t0" for j in jobs},
        remaining_fraction=remaining or {j: 1.0 for j in jobs},
        profiles=profiles or {j: flat_profile() for j in jobs},
        alpha_t=alpha_t,
    )


class TestFifoAndPriority:
    def test_fifo_earliest_arrival_then_id(self):
        c = ctx(arrivals={"b": 10.0, "a": 5.0, "c": 5.0})
        got = select(GrantPolicy("fifo"), offer(), interests("a", "b", "c"), None, c)
        assert got == "a"  # arrival 5 ties broken by id

    def test_priority_highest_wins(self):
        c = ctx(arrivals={"a": 0.0, "b": 50.0}, priorities={"a": 1, "b": 9})
        assert select(GrantPolicy("priority"), offer(), interests("a", "b"), None, c) == "b"

    def test_declines_never_selected(self):
        sigs = [InterestSignal("offer-000000", "a", "decline", reason="x")]
        assert select(GrantPolicy("fifo"), offer(), sigs, None, ctx({"a": 0.0})) is None


class TestEdf:
    def test_earliest_reachable_deadline(self):
        prof = flat_profile()  # runtime 1800 s in every run
        c = ctx(
            arrivals={"a": 0.0, "b": 0.0, "c": 0.0},
            deadlines={"a": 50000.0, "b": 30000.0, "c": 90000.0},
            profiles={j: prof for j in "abc"},
        )
        assert select(GrantPolicy("edf"), offer(), interests("a", "b", "c"), None, c) == "b"

    def test_unreachable_deadline_skipped(self):
        prof = flat_profile()  # needs 1800 s
        c = ctx(
            arrivals={"tight": 0.0, "slack": 0.0},
            deadlines={"tight": 600.0, "slack": 50000.0},
            profiles={"tight": prof, "slack": prof},
        )
        assert select(GrantPolicy("edf"), offer(), interests("tight", "slack"), None, c) == "slack"

    def test_deadline_free_jobs_rank_last(self):
        prof = flat_profile()
        c = ctx(
            arrivals={"free": 0.0, "dl": 100.0},
            deadlines={"free": None, "dl": 50000.0},
            profiles={"free": prof, "dl": prof},
        )
        assert select(GrantPolicy("edf"), offer(), interests("free", "dl"), None, c) == "dl"
        c2 = ctx(arrivals={"free": 0.0}, deadlines={"free": None})
        assert select(GrantPolicy("edf"), offer(), interests("free"), None, c2) == "free"

    def test_all_unreachable_grants_nothing(self):
        prof = flat_profile()
        c = ctx(arrivals={"a": 0.0}, deadlines={"a": 60.0}, profiles={"a": prof})
        assert select(GrantPolicy("edf"), offer(), interests("a"), None, c) is None

    def test_remaining_fraction_scales_demand(self):
        # 90% done: only 180 s of work left, so a 600 s deadline is fine.
        prof = flat_profile()
        c = ctx(arrivals={"a": 0.0}, deadlines={"a": 600.0},
                remaining={"a": 0.1}, profiles={"a": prof})
        assert select(GrantPolicy("edf"), offer(), interests("a"), None, c) == "a"


class TestFairTokens:
    def test_cost_formula(self):
        # 10 GB x 10 min x 1.0 = 100 tokens
        assert offer_cost_tokens(offer(10240, 600.0), 1.0) == pytest.approx(100.0)
        assert offer_cost_tokens(offer(5120, 300.0), 2.0) == pytest.approx(50.0)

    def test_richest_affordable_tenant_wins(self):
        led = TenantLedger(budgets={"acme": 500.0, "zen": 900.0})
        c = ctx(arrivals={"a": 0.0, "z": 10.0}, tenants={"a": "acme", "z": "zen"})
        got = select(GrantPolicy("fair_tokens"), offer(), interests("a", "z"), led, c)
        assert got == "z"

    def test_unaffordable_tenants_filtered(self):
        led = TenantLedger(budgets={"acme": 500.0, "zen": 50.0})  # offer costs 100
        c = ctx(arrivals={"a": 0.0, "z": 10.0}, tenants={"a": "acme", "z": "zen"})
        got = select(GrantPolicy("fair_tokens"), offer(), interests("a", "z"), led, c)
        assert got == "a"
        led2 = TenantLedger(budgets={"acme": 5.0, "zen": 50.0})
        assert select(GrantPolicy("fair_tokens"), offer(), interests("a", "z"), led2, c) is None

    def test_fifo_within_tenant(self):
        led = TenantLedger(budgets={"acme": 500.0})
        c = ctx(arrivals={"a1": 30.0, "a2": 5.0}, tenants={"a1": "acme", "a2": "acme"})
        assert select(GrantPolicy("fair_tokens"), offer(), interests("a1", "a2"), led, c) == "a2"

    def test_requires_ledger(self):
        c = ctx(arrivals={"a": 0.0})
        with pytest.raises(ValueError):
            select(GrantPolicy("fair_tokens"), offer(), interests("a"), None, c)

    def test_ledger_conservation(self):
        led = TenantLedger(budgets={"acme": 100.0})
        led.debit("acme", 60.0)
        led.refund("acme", 10.0)
        assert led.remaining("acme") == pytest.approx(50.0)
        assert led.debited == 60.0 and led.refunded == 10.0
        # balance identity: start - debits + refunds == remaining
        assert 100.0 - led.debited + led.refunded == pytest.approx(led.remaining("acme"))
        with pytest.raises(ValueError):
            led.debit("acme", 51.0)
        assert led.remaining("nobody") == 0.0


class TestGrantPolicyValidation:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            GrantPolicy(kind="lottery")
        with pytest.raises(ValueError):
            GrantPolicy(cost_rate=-1.0)


class TestJainIndex:
    def test_textbook_values(self):
        assert jain_index([1.0, 2.0, 3.0]) == pytest.approx(36.0 / 42.0)
        assert jain_index([5.0, 5.0, 5.0]) == 1.0
        # one tenant hogging everything: index -> 1/n
        assert jain_index([9.0, 0.0, 0.0]) == pytest.approx(1.0 / 3.0)

    def test_dict_and_degenerate_inputs(self):
        assert jain_index({"a": 2.0, "b": 2.0}) == 1.0
        assert jain_index([]) == 1.0
        assert jain_index([0.0, 0.0]) == 1.0
        with pytest.raises(ValueError):
            jain_index([-1.0, 2.0])

"""Grant policies: who gets an offered window, plus fairness accounting.

All policies break ties deterministically by (policy key, arrival, job_id)
so identical inputs always produce identical grants.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .profiles import deadline_admissible

if TYPE_CHECKING:  # protocol imports this module; keep the cycle type-only
    from .protocol import InterestSignal, Offer

__all__ = [
    "GrantPolicy",
    "TenantLedger",
    "SelectionContext",
    "select",
    "offer_cost_tokens",
    "jain_index",
    "POLICY_KINDS",
]

POLICY_KINDS = ("fifo", "priority", "edf", "fair_tokens")


@dataclass(frozen=True)
class GrantPolicy:
    kind: str = "fifo"
    cost_rate: float = 1.0  # tokens per GB-minute of offered window
    token_budgets: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.cost_rate < 0:
            raise ValueError("cost_rate must be >= 0")


class TenantLedger:
    """Token budgets per tenant; debited on materialization, refundable."""

    def __init__(self, budgets: dict[str, float] | None = None):
        self.budgets: dict[str, float] = dict(budgets or {})
        self.debited: float = 0.0
        self.refunded: float = 0.0

    def remaining(self, tenant: str) -> float:
        return self.budgets.get(tenant, 0.0)

    def can_afford(self, tenant: str, cost: float) -> bool:
        return self.remaining(tenant) >= cost - 1e-12

    def debit(self, tenant: str, cost: float) -> None:
        if not self.can_afford(tenant, cost):
            raise ValueError(f"tenant {tenant} cannot afford {cost}")
        self.budgets[tenant] = self.remaining(tenant) - cost
        self.debited += cost

    def refund(self, tenant: str, cost: float) -> None:
        self.budgets[tenant] = self.remaining(tenant) + cost
        self.refunded += cost


def offer_cost_tokens(offer: Offer, cost_rate: float) -> float:
    """Token price of a window: capacity_GB x window_minutes x rate."""
    gb = offer.window.capacity_mb / 1024.0
    minutes = offer.window.duration / 60.0
    return gb * minutes * cost_rate


@dataclass
class SelectionContext:
    """What a policy may consult about the candidates."""

    now: float
    arrivals: dict[str, float]
    priorities: dict[str, int]
    deadlines: dict[str, float | None]
    tenants: dict[str, str]
    remaining_fraction: dict[str, float]
    profiles: dict[str, object]
    alpha_t: float = 0.05


def select(
    policy: GrantPolicy,
    offer: Offer,
    interests: list[InterestSignal],
    ledger: TenantLedger | None,
    ctx: SelectionContext,
) -> str | None:
    """Pick the job to grant the offer to, or None.

    fifo: earliest arrival. priority: highest priority first. edf: earliest
    deadline among jobs whose deadline is still probabilistically reachable
    (deadline_admissible at alpha_t); jobs without deadlines rank last and
    jobs with unreachable deadlines are skipped. fair_tokens: among tenants
    whose budget covers the offer, the one with the largest remaining
    budget, fifo within the tenant.
    """
    candidates = [s.job_id for s in interests if s.kind == "interest"]
    if not candidates:
        return None
    fifo_key = lambda j: (ctx.arrivals[j], j)

    if policy.kind == "fifo":
        return min(candidates, key=fifo_key)

    if policy.kind == "priority":
        return min(candidates, key=lambda j: (-ctx.priorities[j], ctx.arrivals[j], j))

    if policy.kind == "edf":
        with_deadline = []
        free = []
        for j in candidates:
            deadline = ctx.deadlines.get(j)
            if deadline is None:
                free.append(j)
                continue
            d = deadline_admissible(
                ctx.profiles[j],
                ctx.remaining_fraction[j],
                deadline - ctx.now,
                ctx.alpha_t,
            )
            if d.admissible:
                with_deadline.append(j)
        if with_deadline:
            return min(with_deadline, key=lambda j: (ctx.deadlines[j], ctx.arrivals[j], j))
        if free:
            return min(free, key=fifo_key)
        return None

    if policy.kind == "fair_tokens":
        if ledger is None:
            raise ValueError("fair_tokens needs a tenant ledger")
        cost = offer_cost_tokens(offer, policy.cost_rate)
        affordable = [j for j in candidates if ledger.can_afford(ctx.tenants[j], cost)]
        if not affordable:
            return None
        richest = max(
            {ctx.tenants[j] for j in affordable},
            key=lambda t: (ledger.remaining(t), t),
        )
        return min((j for j in affordable if ctx.tenants[j] == richest), key=fifo_key)

    raise ValueError(f"unknown policy kind {policy.kind!r}")


def jain_index(service: list[float] | dict[str, float]) -> float:
    """Jain fairness index (sum x)^2 / (n sum x^2); all-zero counts as 1."""
    values = list(service.values()) if isinstance(service, dict) else list(service)
    if not values:
        return 1.0
    if any(v < 0 for v in values):
        raise ValueError("service shares must be non-negative")
    total = sum(values)
    if total == 0:
        return 1.0
    return total * total / (len(values) * sum(v * v for v in values))

"""Posted-price mechanism execution: sequential arrivals with utility-
maximizing purchases, deterministic tie policies (including an exact
adversarial one), worst-order and adaptive-adversary evaluation, and the
better-of-two selector for unrestricted knapsack instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .core import (
    DEFAULT_CAP,
    NULL,
    TOL,
    UNAVAILABLE,
    Allocation,
    CapExceeded,
    Environment,
    KnapsackEnv,
    ThresholdValuation,
    Valuation,
    _token_key,
    replace_at,
    value,
    welfare,
)
from .oracle import knapsack_dp
from .pricing import BalanceParams, PricingRule, knapsack_prices

TIE_POLICIES = ("prefer_null", "prefer_buy_lexmin", "adversarial_min_welfare")


@dataclass(frozen=True)
class MechanismTrace:
    order: tuple[int, ...]
    outcomes: Allocation
    payments: tuple[float, ...]
    utilities: tuple[float, ...]
    welfare: float
    revenue: float
    utility_sum: float

    def as_dict(self) -> dict:
        return {
            "order": list(self.order),
            "outcomes": list(self.outcomes),
            "payments": list(self.payments),
            "utilities": list(self.utilities),
            "welfare": self.welfare,
            "revenue": self.revenue,
            "utility_sum": self.utility_sum,
        }


def _check_order(n: int, order: Sequence[int]) -> tuple[int, ...]:
    order = tuple(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order {order} is not a permutation of {n} agents")
    return order


def _tied_candidates(prices: PricingRule, v: Valuation, i: int, y: Allocation):
    """Utility-maximizing menu entries for agent i, lexmin token first.
    The null outcome is always purchasable at zero, so the best utility is
    non-negative."""
    menu = prices.menu(i, y)
    best = max(value(v, tok) - p for tok, p in menu)
    cands = [
        (tok, p) for tok, p in menu if value(v, tok) - p >= best - TOL
    ]
    cands.sort(key=lambda tp: _token_key(tp[0]))
    return cands


def _pick(cands, tie: str):
    if tie == "prefer_null":
        for tok, p in cands:
            if tok == NULL:
                return tok, p
        return cands[0]
    if tie == "prefer_buy_lexmin":
        for tok, p in cands:
            if tok != NULL:
                return tok, p
        return cands[0]
    raise ValueError(f"unknown tie policy {tie}")


def run_posted_price(
    env: Environment,
    prices: PricingRule,
    profile: Sequence[Valuation],
    order: Sequence[int],
    tie: str = "adversarial_min_welfare",
) -> MechanismTrace:
    """Approach agents in ``order``; each buys a utility-maximizing entry from
    the menu of finitely-priced outcomes given prior purchases.

    Under ``adversarial_min_welfare`` ties are resolved by exact recursion:
    among an agent's utility maximizers, take the branch minimizing the final
    total welfare (lexmin token on exact ties).  This is full-information
    tie resolution over the given realized profile — the right semantics for
    worst-order studies on deterministic instances; expectations over a
    distribution must use OnlinePostedPriceRunner instead, whose tie choices
    cannot see unrealized future values.
    """
    order = _check_order(env.n, order)
    if tie not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie}")

    chosen: dict[int, tuple[object, float]] = {}
    if tie == "adversarial_min_welfare":
        memo: dict = {}

        def future(pos: int, y: Allocation) -> float:
            if pos == len(order):
                return 0.0
            key = (pos, y)
            if key in memo:
                return memo[key][0]
            i = order[pos]
            best_w, best_tok, best_p = math.inf, None, 0.0
            for tok, p in _tied_candidates(prices, profile[i], i, y):
                w = value(profile[i], tok) + future(pos + 1, replace_at(y, i, tok))
                if w < best_w - TOL:
                    best_w, best_tok, best_p = w, tok, p
            memo[key] = (best_w, best_tok, best_p)
            return best_w

        y = env.null_allocation()
        future(0, y)
        for pos, i in enumerate(order):
            _, tok, p = memo[(pos, y)]
            chosen[i] = (tok, p)
            y = replace_at(y, i, tok)
    else:
        y = env.null_allocation()
        for i in order:
            tok, p = _pick(_tied_candidates(prices, profile[i], i, y), tie)
            chosen[i] = (tok, p)
            y = replace_at(y, i, tok)

    outcomes = tuple(chosen[i][0] for i in range(env.n))
    payments = tuple(chosen[i][1] for i in range(env.n))
    utilities = tuple(
        value(profile[i], outcomes[i]) - payments[i] for i in range(env.n)
    )
    total = welfare(profile, outcomes)
    return MechanismTrace(
        order=order,
        outcomes=outcomes,
        payments=payments,
        utilities=utilities,
        welfare=total,
        revenue=math.fsum(payments),
        utility_sum=math.fsum(utilities),
    )


def verify_trace(env, prices, profile, trace: MechanismTrace) -> None:
    """Re-derive the menus along the trace and assert the per-purchase
    invariants: quoted payments, feasibility, individual rationality, and
    that no unilateral alternative purchase beats the realized utility."""
    y = env.null_allocation()
    for i in trace.order:
        tok = trace.outcomes[i]
        quoted = prices.price(i, tok, y)
        assert quoted is not UNAVAILABLE, "purchased an unavailable entry"
        assert abs(quoted - trace.payments[i]) <= TOL, "payment differs from quote"
        assert env.is_feasible(replace_at(y, i, tok)), "infeasible purchase"
        u = value(profile[i], tok) - quoted
        assert u >= -TOL, "individually irrational purchase"
        for alt, p in prices.menu(i, y):
            assert value(profile[i], alt) - p <= u + TOL, "better alternative existed"
        y = replace_at(y, i, tok)
    assert abs(trace.welfare - (trace.revenue + trace.utility_sum)) <= 1e-7


def worst_order_welfare(
    env,
    prices,
    profile,
    tie: str = "adversarial_min_welfare",
    cap: int = 40_320,
) -> tuple[float, tuple[int, ...]]:
    """Minimum trace welfare over all arrival permutations, with a witnessing
    order (first minimizer in permutation order)."""
    count = math.factorial(env.n)
    if count > cap:
        raise CapExceeded(count, cap)
    best_w, best_order = math.inf, None
    for order in itertools.permutations(range(env.n)):
        trace = run_posted_price(env, prices, profile, order, tie)
        if trace.welfare < best_w - TOL:
            best_w, best_order = trace.welfare, order
    return best_w, best_order


class OnlinePostedPriceRunner:
    """Posted-price execution whose tie choices condition on realized history
    and the distribution, never on unrealized future values.

    Under the adversarial policy each agent's tied choice minimizes the
    expected continuation welfare over future draws.  (Resolving ties against
    the realized future values instead is strictly stronger than any
    utility-maximizing behaviour and genuinely breaks the welfare guarantees,
    because early choices would leak later agents' values.)  The continuation
    memo is shared between the exact expectation and sampled runs.
    """

    def __init__(self, env, prices, dist, order: Sequence[int],
                 tie: str = "adversarial_min_welfare", cap: int = 1_000_000):
        if tie not in TIE_POLICIES:
            raise ValueError(f"unknown tie policy {tie}")
        self.env = env
        self.prices = prices
        self.dist = dist
        self.order = _check_order(env.n, order)
        self.tie = tie
        self.cap = cap
        self._memo: dict = {}

    def _choice(self, pos: int, i: int, v, y: Allocation):
        cands = _tied_candidates(self.prices, v, i, y)
        if self.tie != "adversarial_min_welfare":
            return _pick(cands, self.tie)
        best, best_cand = math.inf, cands[0]
        for tok, p in cands:
            w = value(v, tok) + self._solve(pos + 1, replace_at(y, i, tok))
            if w < best - TOL:
                best, best_cand = w, (tok, p)
        return best_cand

    def _solve(self, pos: int, y: Allocation) -> float:
        if pos == len(self.order):
            return 0.0
        key = (pos, y)
        if key in self._memo:
            return self._memo[key]
        if len(self._memo) > self.cap:
            raise CapExceeded(len(self._memo), self.cap)
        i = self.order[pos]
        total = 0.0
        for v, prob in self.dist.atoms(i):
            tok, _p = self._choice(pos, i, v, y)
            total += prob * (value(v, tok) + self._solve(pos + 1, replace_at(y, i, tok)))
        self._memo[key] = total
        return total

    def expected_welfare(self) -> float:
        return self._solve(0, self.env.null_allocation())

    def run(self, profile: Sequence[Valuation]) -> MechanismTrace:
        """One realized-profile execution with the online tie policy."""
        y = self.env.null_allocation()
        chosen: dict[int, tuple[object, float]] = {}
        for pos, i in enumerate(self.order):
            tok, p = self._choice(pos, i, profile[i], y)
            chosen[i] = (tok, p)
            y = replace_at(y, i, tok)
        outcomes = tuple(chosen[i][0] for i in range(self.env.n))
        payments = tuple(chosen[i][1] for i in range(self.env.n))
        utilities = tuple(
            value(profile[i], outcomes[i]) - payments[i] for i in range(self.env.n)
        )
        return MechanismTrace(
            order=self.order,
            outcomes=outcomes,
            payments=payments,
            utilities=utilities,
            welfare=welfare(profile, outcomes),
            revenue=math.fsum(payments),
            utility_sum=math.fsum(utilities),
        )


def expected_posted_price_welfare(
    env,
    prices,
    dist,
    order: Sequence[int],
    tie: str = "adversarial_min_welfare",
    cap: int = 1_000_000,
) -> float:
    """Exact expected welfare of the posted-price mechanism under a fixed
    arrival order, with history-conditioned tie choices."""
    return OnlinePostedPriceRunner(env, prices, dist, order, tie, cap).expected_welfare()


def adaptive_adversary_welfare(env, prices, dist, cap: int = 1_000_000) -> float:
    """Exact minimax expected welfare: the adversary picks the next agent
    after observing realized valuations and purchases; agents' tie choices
    are also adversarial.  Memoized on (remaining agents, purchases)."""
    memo: dict = {}

    def solve(remaining: frozenset, y: Allocation) -> float:
        if not remaining:
            return 0.0
        key = (remaining, y)
        if key in memo:
            return memo[key]
        if len(memo) > cap:
            raise CapExceeded(len(memo), cap)
        worst = math.inf
        for i in sorted(remaining):
            rest = remaining - {i}
            expect = 0.0
            for v, prob in dist.atoms(i):
                branch = math.inf
                for tok, _p in _tied_candidates(prices, v, i, y):
                    w = value(v, tok) + solve(rest, replace_at(y, i, tok))
                    branch = min(branch, w)
                expect += prob * branch
            worst = min(worst, expect)
        memo[key] = worst
        return worst

    return solve(frozenset(range(env.n)), env.null_allocation())


# ---------------------------------------------------------------------------
# Better-of-two selection for unrestricted knapsack
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectorResult:
    choice: str  # per_unit | whole_unit
    expected_welfare: float
    per_unit_welfare: float
    whole_unit_welfare: float
    per_unit_rate: float
    whole_unit_price: float


def whole_unit_prices(env: KnapsackEnv, price: float) -> PricingRule:
    """Take-it-or-leave-it price for the entire unit; partial quantities are
    kept off the menu (a deliberately non-total rule)."""

    def finite(i, q, y):
        return price if abs(float(q) - 1.0) <= TOL else UNAVAILABLE

    return PricingRule(
        env,
        finite,
        static=True,
        anonymous=True,
        provenance={"construction": "whole-unit", "price": price},
    )


def _restricted_expected_reference_welfare(env: KnapsackEnv, dist, cap: int) -> float:
    """E[v(ALG(v))] where the reference rule serves only demands at most half
    the capacity (larger demands are zeroed out of the instance)."""
    total = 0.0
    for profile, prob in dist.profiles(cap):
        clipped = tuple(
            v if isinstance(v, ThresholdValuation) and v.size <= 0.5 + TOL
            else ThresholdValuation(0.0, getattr(v, "size", 1.0))
            for v in profile
        )
        total += prob * welfare(clipped, knapsack_dp(env, clipped))
    return total


def two_mechanism_selector(
    env: KnapsackEnv, dist, cap: int = DEFAULT_CAP
) -> SelectorResult:
    """Exact adversarial expected welfare of the scaled per-unit mechanism
    (serving demands at most half the capacity) versus the best whole-unit
    take-it-or-leave-it price; returns the better of the two."""
    params = BalanceParams(alpha=1.0, beta=2.0)
    rate = params.scale_factor() * _restricted_expected_reference_welfare(env, dist, cap)
    per_unit_rule = knapsack_prices(env, (), rate)
    per_unit_w = adaptive_adversary_welfare(env, per_unit_rule, dist)

    atoms = sorted(
        {
            v.value_at_size
            for i in range(env.n)
            for v, _ in dist.atoms(i)
            if isinstance(v, ThresholdValuation)
        }
    )
    candidates = [0.0] + atoms
    for lo, hi in zip(atoms, atoms[1:]):
        candidates.append((lo + hi) / 2.0)
    best_p, best_w = 0.0, -math.inf
    for p in sorted(candidates):
        w = adaptive_adversary_welfare(env, whole_unit_prices(env, p), dist)
        if w > best_w + TOL:
            best_p, best_w = p, w

    if per_unit_w >= best_w:
        return SelectorResult(
            "per_unit", per_unit_w, per_unit_w, best_w, rate, best_p
        )
    return SelectorResult(
        "whole_unit", best_w, per_unit_w, best_w, rate, best_p
    )

"""Certification of the two price-balance conditions by exhaustive
enumeration against the allocation oracles.

For every feasible allocation x, condition (a) lower-bounds the price sum of
x itself against the welfare the reference rule loses to the exchange set at
x, and condition (b) upper-bounds the price sum of every member of that
exchange set.  Condition sums follow a declared agent indexing; the checker
can also quantify over all indexings, which it does with a min/max subset
dynamic program over predecessor sets rather than a factorial loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import (
    DEFAULT_CAP,
    NULL,
    TOL,
    UNAVAILABLE,
    Allocation,
    Environment,
    Valuation,
    restrict,
    welfare,
)
from .oracle import ExchangeFamily, residual_opt
from .pricing import BalanceParams, PricingRule

ORDER_MODES = ("declared", "all")


@dataclass
class BalanceReport:
    passed: bool
    params: BalanceParams
    condition_a_min_slack: float
    condition_b_min_slack: float
    witnesses: list = field(default_factory=list)
    structural_violations: list = field(default_factory=list)
    checked_allocations: int = 0
    checked_members: int = 0
    order_mode: str = "declared"

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "params": {
                "alpha": self.params.alpha,
                "beta": self.params.beta,
                "beta1": self.params.beta1,
                "beta2": self.params.beta2,
            },
            "condition_a_min_slack": self.condition_a_min_slack,
            "condition_b_min_slack": self.condition_b_min_slack,
            "witnesses": self.witnesses[:10],
            "structural_violations": self.structural_violations[:10],
            "checked_allocations": self.checked_allocations,
            "checked_members": self.checked_members,
            "order_mode": self.order_mode,
        }


def _submasks_of(mask: int) -> list[int]:
    subs = [0]
    m = mask
    while m:
        bit = m & -m
        m ^= bit
        subs.extend([s | bit for s in subs])
    return subs


class _PriceSums:
    """Price sums Σ_i p_i(z_i | x restricted to predecessors) for a fixed
    conditioning allocation x, minimized or maximized over agent orders by a
    subset DP (the term for an agent depends on its predecessor set only).

    UNAVAILABLE entries poison the sum; they are reported as structural
    violations by the caller."""

    def __init__(self, prices: PricingRule, x: Allocation, n: int):
        self.prices = prices
        self.x = x
        self.n = n

    def term(self, i: int, z_i, pred_mask: int):
        cond = restrict(self.x, [j for j in range(self.n) if pred_mask >> j & 1])
        return self.prices.price(i, z_i, cond)

    def declared_order(self, z: Allocation, order: Sequence[int]):
        total, unavailable = 0.0, False
        mask = 0
        for i in order:
            p = self.term(i, z[i], mask)
            if p is UNAVAILABLE:
                unavailable = True
            else:
                total += p
            mask |= 1 << i
        return total, unavailable

    def static_sum(self, z: Allocation):
        """For static rules the conditioning prefix never changes a feasible
        entry's price, so every order gives the same sum."""
        total, unavailable = 0.0, False
        for i in range(self.n):
            p = self.term(i, z[i], 0)
            if p is UNAVAILABLE:
                unavailable = True
            else:
                total += p
        return total, unavailable

    def extremal(self, z: Allocation, maximize: bool):
        """Min (or max) over all agent orders of the price sum for outcomes z
        conditioned on x-prefixes.  Returns (value, witness order, saw_unavailable).

        The term for an agent depends on its predecessor set only through the
        restriction of x, i.e. on pred_mask & support(x); terms are
        precomputed per collapsed mask and the subset DP runs on floats.
        UNAVAILABLE terms are treated as 0 in the sum but flagged."""
        n = self.n
        supp = 0
        for j, xj in enumerate(self.x):
            if xj != NULL:
                supp |= 1 << j
        cond_masks = _submasks_of(supp)
        # term_table[i][collapsed mask] = (price, unavailable?)
        term_table: list[dict] = []
        for i in range(n):
            row = {}
            for cm in cond_masks:
                p = self.term(i, z[i], cm & ~(1 << i))
                row[cm & ~(1 << i)] = (0.0, True) if p is UNAVAILABLE else (p, False)
            term_table.append(row)

        full = (1 << n) - 1
        sign = -1.0 if maximize else 1.0
        dp = [math.inf] * (full + 1)
        flag = [False] * (full + 1)
        parent = [-1] * (full + 1)
        dp[0] = 0.0
        for mask in range(1, full + 1):
            best, best_i, best_flag = math.inf, -1, False
            m = mask
            while m:
                bit = m & -m
                i = bit.bit_length() - 1
                m ^= bit
                prev = mask ^ bit
                p, bad = term_table[i][prev & supp & ~bit]
                cand = dp[prev] + sign * p
                if cand < best - TOL:
                    best, best_i, best_flag = cand, i, bad or flag[prev]
            dp[mask] = best
            parent[mask] = best_i
            flag[mask] = best_flag
        order = []
        mask = full
        while mask:
            i = parent[mask]
            order.append(i)
            mask ^= 1 << i
        return sign * dp[full], tuple(reversed(order)), flag[full]


def _condition_bounds(params: BalanceParams, alg_w: float, residual_w: float):
    rhs_a = (alg_w - residual_w) / params.alpha
    if params.weak:
        rhs_b = params.beta1 * residual_w + params.beta2 * alg_w
    else:
        rhs_b = params.beta * residual_w
    return rhs_a, rhs_b


def _check(
    env: Environment,
    profile: Sequence[Valuation],
    prices: PricingRule,
    alg_alloc: Allocation,
    family: ExchangeFamily,
    params: BalanceParams,
    order: Optional[Sequence[int]],
    order_mode: str,
    cap: int,
    feasible: Optional[list] = None,
) -> BalanceReport:
    from .core import enumerate_feasible

    if order_mode not in ORDER_MODES:
        raise ValueError(f"unknown order mode {order_mode}")
    if order is None:
        order = tuple(range(env.n))
    alg_w = welfare(profile, alg_alloc)
    report = BalanceReport(
        passed=True,
        params=params,
        condition_a_min_slack=math.inf,
        condition_b_min_slack=math.inf,
        order_mode=order_mode,
    )
    if feasible is None:
        feasible = enumerate_feasible(env, cap)
    members_cache: dict = {}
    residual_cache: dict = {}
    for x in feasible:
        report.checked_allocations += 1
        fam_key = family.members_key(x)
        if fam_key not in members_cache:
            members_cache[fam_key] = family.members(x, cap)
            residual_cache[fam_key] = welfare(
                profile, residual_opt(env, profile, family, x, cap)
            )
        members = members_cache[fam_key]
        residual_w = residual_cache[fam_key]
        rhs_a, rhs_b = _condition_bounds(params, alg_w, residual_w)
        sums = _PriceSums(prices, x, env.n)

        def price_sum(z, maximize):
            if prices.static:
                total, bad = sums.static_sum(z)
                return total, tuple(order), bad
            if order_mode == "declared":
                total, bad = sums.declared_order(z, order)
                return total, tuple(order), bad
            return sums.extremal(z, maximize=maximize)

        lhs_a, wit_a, bad = price_sum(x, maximize=False)
        if bad:
            report.structural_violations.append(("a", x, wit_a))
            report.passed = False
        slack_a = lhs_a - rhs_a
        if slack_a < report.condition_a_min_slack:
            report.condition_a_min_slack = slack_a
        if slack_a < -TOL:
            report.passed = False
            report.witnesses.append(("a", x, None, lhs_a, rhs_a, wit_a))

        for member in members:
            report.checked_members += 1
            lhs_b, wit_b, bad = price_sum(member, maximize=True)
            if bad:
                report.structural_violations.append(("b", x, member))
                report.passed = False
            slack_b = rhs_b - lhs_b
            if slack_b < report.condition_b_min_slack:
                report.condition_b_min_slack = slack_b
            if slack_b < -TOL:
                report.passed = False
                report.witnesses.append(("b", x, member, lhs_b, rhs_b, wit_b))
    if not feasible:
        report.condition_a_min_slack = 0.0
        report.condition_b_min_slack = 0.0
    if report.condition_b_min_slack == math.inf:
        report.condition_b_min_slack = 0.0  # no exchange members anywhere
    return report


def check_balanced(
    env,
    profile,
    prices,
    alg_alloc,
    family,
    params: BalanceParams,
    order: Optional[Sequence[int]] = None,
    order_mode: str = "all",
    cap: int = DEFAULT_CAP,
) -> BalanceReport:
    """Certify the strong-form conditions at (alpha, beta)."""
    if params.weak:
        raise ValueError("strong-form check requires beta, not beta1/beta2")
    return _check(env, profile, prices, alg_alloc, family, params, order, order_mode, cap)


def check_weakly_balanced(
    env,
    profile,
    prices,
    alg_alloc,
    family,
    params: BalanceParams,
    order: Optional[Sequence[int]] = None,
    order_mode: str = "all",
    cap: int = DEFAULT_CAP,
) -> BalanceReport:
    """Certify the weak-form conditions at (alpha, beta1, beta2)."""
    if not params.weak:
        raise ValueError("weak-form check requires beta1 and beta2")
    return _check(env, profile, prices, alg_alloc, family, params, order, order_mode, cap)


def minimal_beta(
    env,
    profile,
    prices,
    alg_alloc,
    family,
    alpha: float,
    order: Optional[Sequence[int]] = None,
    order_mode: str = "all",
    cap: int = DEFAULT_CAP,
) -> float:
    """Smallest beta for which the strong upper-bound condition holds, given
    that the lower-bound condition already holds at alpha: the largest ratio
    of an exchange member's price sum to the residual optimum (0/0 counts as
    satisfied; positive/0 is unbounded)."""
    from .core import enumerate_feasible

    if order is None:
        order = tuple(range(env.n))
    best = 0.0
    for x in enumerate_feasible(env, cap):
        residual_w = welfare(profile, residual_opt(env, profile, family, x, cap))
        sums = _PriceSums(prices, x, env.n)
        for member in family.members(x, cap):
            if order_mode == "declared":
                lhs, bad = sums.declared_order(member, order)
            else:
                lhs, _, bad = sums.extremal(member, maximize=True)
            if bad:
                raise ValueError("unavailable entry in a condition sum")
            if lhs <= TOL:
                continue
            if residual_w <= TOL:
                return math.inf
            best = max(best, lhs / residual_w)
    return best

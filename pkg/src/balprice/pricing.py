"""Pricing-rule constructions: item prices from supporting clauses and
fractional bundle weights, per-unit capacity prices, dynamic residual-value
prices, critical-value prices, reference-allocation prices for binary
single-parameter problems, composition across markets and over maxima, and
the scaled expected-price transform for stochastic instances.

Every rule prices the null outcome at zero and is UNAVAILABLE exactly on
entries infeasible given the current partial allocation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .core import (
    DEFAULT_CAP,
    NULL,
    TOL,
    UNAVAILABLE,
    AdditiveValuation,
    Allocation,
    CombinatorialAuctionEnv,
    Environment,
    KnapsackEnv,
    MatroidEnv,
    MphValuation,
    PipEnv,
    ProductEnv,
    ScalarValuation,
    SingleItemEnv,
    Valuation,
    XosValuation,
    bitmask_items,
    enumerate_feasible,
    prefix,
    replace_at,
    value,
    welfare,
)
from .oracle import (
    AllocationRule,
    FractionalSolution,
    OPT_RULE,
    agent_value,
    contracted_opt,
    critical_value,
    greedy,
    is_binary_env,
    opt,
)


class PricingError(ValueError):
    """Invalid pricing parameters or construction preconditions."""


@dataclass(frozen=True)
class BalanceParams:
    """Parameters of the price-balance conditions.

    The strong form carries (alpha, beta); the weak form carries
    (alpha, beta1, beta2) and requires beta1 + beta2 >= 1/alpha for the
    scaled-price welfare guarantee to apply.
    """

    alpha: float
    beta: Optional[float] = None
    beta1: Optional[float] = None
    beta2: Optional[float] = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise PricingError("alpha must be positive")
        strong = self.beta is not None
        weak = self.beta1 is not None or self.beta2 is not None
        if strong == weak:
            raise PricingError("give either beta (strong) or beta1+beta2 (weak)")
        if weak and (self.beta1 is None or self.beta2 is None):
            raise PricingError("weak form needs both beta1 and beta2")

    @property
    def weak(self) -> bool:
        return self.beta is None

    def scale_factor(self) -> float:
        """Multiplier applied to expected prices in the posted mechanism."""
        if not self.weak:
            return self.alpha / (1.0 + self.alpha * self.beta)
        if self.beta1 + self.beta2 < 1.0 / self.alpha - TOL:
            raise PricingError("weak form requires beta1 + beta2 >= 1/alpha")
        return 1.0 / (self.beta1 + max(2.0 * self.beta2, 1.0 / self.alpha))

    def welfare_guarantee(self) -> float:
        """Fraction of the reference rule's expected welfare guaranteed by the
        scaled expected prices."""
        if not self.weak:
            return 1.0 / (1.0 + self.alpha * self.beta)
        self.scale_factor()  # validates the weak-form precondition
        return 1.0 / (self.alpha * (2.0 * self.beta1 + 4.0 * self.beta2))


class PricingRule:
    """Priced menu evaluator p_i(x_i | y) with caching and provenance.

    ``finite_price`` is only consulted on entries feasible given the partial
    allocation y (with the agent's own slot cleared); infeasible entries are
    UNAVAILABLE and the null outcome is free.
    """

    def __init__(
        self,
        env: Environment,
        finite_price: Callable[[int, object, Allocation], float],
        *,
        static: bool,
        anonymous: bool,
        item_linear: bool = False,
        provenance: Optional[dict] = None,
    ):
        self.env = env
        self._finite_price = finite_price
        self.static = static
        self.anonymous = anonymous
        self.item_linear = item_linear
        self.provenance = provenance or {}
        self._cache: dict = {}

    def price(self, i: int, x_i, y: Allocation):
        if x_i == NULL:
            return 0.0
        y = replace_at(y, i, NULL)
        key = (i, x_i, y)
        if key not in self._cache:
            if not self.env.is_feasible(replace_at(y, i, x_i)):
                self._cache[key] = UNAVAILABLE
            else:
                self._cache[key] = self._finite_price(i, x_i, y)
        return self._cache[key]

    def menu(self, i: int, y: Allocation) -> list[tuple[object, float]]:
        """Purchasable (outcome, price) pairs for agent i given y."""
        out = []
        for tok in self.env.agent_outcomes(i):
            p = self.price(i, tok, y)
            if p is not UNAVAILABLE:
                out.append((tok, p))
        return out


def scaled_prices(rule: PricingRule, factor: float) -> PricingRule:
    """The same menu with every finite price multiplied by ``factor``."""

    def finite(i, x_i, y):
        p = rule.price(i, x_i, y)
        return UNAVAILABLE if p is UNAVAILABLE else factor * p

    return PricingRule(
        rule.env,
        finite,
        static=rule.static,
        anonymous=rule.anonymous,
        item_linear=rule.item_linear,
        provenance=dict(rule.provenance, scale=factor),
    )


# ---------------------------------------------------------------------------
# Item-price constructions
# ---------------------------------------------------------------------------


def _item_price_rule(env, per_item: Sequence[float], provenance: dict) -> PricingRule:
    per_item = tuple(per_item)

    def finite(i, mask, y):
        return math.fsum(per_item[j] for j in bitmask_items(mask))

    provenance = dict(provenance, item_prices=list(per_item))
    return PricingRule(
        env, finite, static=True, anonymous=True, item_linear=True, provenance=provenance
    )


def single_item_prices(env: SingleItemEnv, profile: Sequence[Valuation]) -> PricingRule:
    """Post the highest value; purchasable while the item is unallocated."""
    if not isinstance(env, SingleItemEnv):
        raise PricingError("single_item_prices requires a single-item environment")
    top = max(value(v, 1) for v in profile)

    def finite(i, x_i, y):
        return top

    return PricingRule(
        env,
        finite,
        static=True,
        anonymous=True,
        provenance={"construction": "single-item", "price": top},
    )


def bundle_split_item_prices(env, profile, alloc: Allocation) -> PricingRule:
    """Each item allocated to a winner is priced at the winner's bundle value
    split evenly over the bundle; unallocated items are free."""
    if not isinstance(env, CombinatorialAuctionEnv):
        raise PricingError("bundle split prices require a combinatorial auction")
    per_item = [0.0] * env.items
    for i, mask in enumerate(alloc):
        items = bitmask_items(mask)
        if not items:
            continue
        share = value(profile[i], mask) / len(items)
        for j in items:
            per_item[j] = share
    return _item_price_rule(
        env, per_item, {"construction": "intro-bundle", "base_allocation": list(alloc)}
    )


def supporting_valuation(v: Valuation, x, items: int) -> Valuation:
    """The first maximum-attaining clause of an XOS or hypergraph valuation on
    outcome x, as a standalone valuation; other kinds support themselves."""
    if isinstance(v, XosValuation):
        if not v.clauses:
            return AdditiveValuation((0.0,) * items)
        return AdditiveValuation(v.clauses[v.supporting_clause(x)])
    if isinstance(v, MphValuation):
        if not v.clauses:
            return v
        return MphValuation((v.clauses[v.supporting_clause(x)],))
    return v


def xos_item_prices(env, profile, alloc: Allocation) -> PricingRule:
    """Price each allocated item at its winner's supporting additive clause."""
    if not isinstance(env, CombinatorialAuctionEnv):
        raise PricingError("xos item prices require a combinatorial auction")
    per_item = [0.0] * env.items
    for i, mask in enumerate(alloc):
        if mask == NULL:
            continue
        sup = supporting_valuation(profile[i], mask, env.items)
        if isinstance(sup, AdditiveValuation):
            clause = sup.values
        elif isinstance(sup, ScalarValuation):
            raise PricingError("xos item prices need additive or xos valuations")
        else:
            raise PricingError(f"unsupported valuation kind {sup.kind} for xos prices")
        for j in bitmask_items(mask):
            per_item[j] = clause[j]
    return _item_price_rule(
        env, per_item, {"construction": "xos", "base_allocation": list(alloc)}
    )


def mphk_item_prices(env, profile, alg_alloc: Allocation) -> PricingRule:
    """Each item is priced at the total weight of its winner's supporting
    hyperedges containing it, extended additively to bundles."""
    if not isinstance(env, CombinatorialAuctionEnv):
        raise PricingError("hypergraph item prices require a combinatorial auction")
    per_item = [0.0] * env.items
    for i, mask in enumerate(alg_alloc):
        if mask == NULL:
            continue
        v = profile[i]
        if isinstance(v, MphValuation):
            sup = supporting_valuation(v, mask, env.items)
            clause = sup.clauses[0] if sup.clauses else ()
        elif isinstance(v, (XosValuation, AdditiveValuation)):
            sup = supporting_valuation(v, mask, env.items)
            vals = sup.values if isinstance(sup, AdditiveValuation) else ()
            clause = tuple((1 << j, vals[j]) for j in range(env.items))
        else:
            raise PricingError(f"unsupported valuation kind {v.kind} for hypergraph prices")
        for j in bitmask_items(mask):
            per_item[j] += math.fsum(
                w for edge, w in clause if edge >> j & 1 and edge & mask == edge
            )
    return _item_price_rule(
        env, per_item, {"construction": "mph", "base_allocation": list(alg_alloc)}
    )


def fractional_ca_item_prices(env, profile, lp_solution: FractionalSolution) -> PricingRule:
    """Items priced by their total value-weighted mass in the optimal
    fractional bundle assignment; buyers purchase integral bundles."""
    per_item = [0.0] * env.items
    for i, mask, w in lp_solution.weights:
        v = value(profile[i], mask)
        for j in bitmask_items(mask):
            per_item[j] += w * v
    return _item_price_rule(
        env,
        per_item,
        {"construction": "fractional-ca", "lp_objective": lp_solution.objective},
    )


# ---------------------------------------------------------------------------
# Capacity-based constructions
# ---------------------------------------------------------------------------


def knapsack_prices(env: KnapsackEnv, profile, alg_welfare: float) -> PricingRule:
    """A single static anonymous per-unit price equal to the reference
    welfare; quantities are purchasable while they fit."""
    if not isinstance(env, KnapsackEnv):
        raise PricingError("knapsack prices require a knapsack environment")

    def finite(i, q, y):
        return float(q) * alg_welfare

    return PricingRule(
        env,
        finite,
        static=True,
        anonymous=True,
        provenance={"construction": "knapsack", "per_unit": alg_welfare},
    )


def pip_prices(env: PipEnv, profile, alg_alloc: Allocation) -> PricingRule:
    """Per-constraint unit prices: each constraint carries the total reference
    value of the agents loading it; an agent pays their load-weighted sum."""
    if not isinstance(env, PipEnv):
        raise PricingError("pip prices require a packing environment")
    rates = []
    for i, v in enumerate(profile):
        if not isinstance(v, ScalarValuation):
            raise PricingError("pip prices require scalar (linear) valuations")
        rates.append(v.rate)
    row_price = [
        math.fsum(
            rates[i] * float(alg_alloc[i]) for i in range(env.n) if row[i] > TOL
        )
        for row in env.matrix
    ]

    def finite(i, q, y):
        return float(q) * math.fsum(
            env.matrix[j][i] * row_price[j] for j in range(env.rows)
        )

    return PricingRule(
        env,
        finite,
        static=True,
        anonymous=False,
        provenance={"construction": "pip", "constraint_prices": row_price},
    )


# ---------------------------------------------------------------------------
# Dynamic matroid prices
# ---------------------------------------------------------------------------


def _matroid_element_values(env: MatroidEnv, profile) -> list[float]:
    vals = [0.0] * env.matroid.ground
    for i, owned in enumerate(env.elements):
        for e in owned:
            vals[e] = value(profile[i], 1 << e)
    return vals


def _matroid_residual_value(env: MatroidEnv, element_vals, taken_mask: int) -> float:
    """Max-weight independent extension of ``taken_mask`` (greedy, exact for
    additive element values)."""
    chosen = taken_mask
    total = 0.0
    order = sorted(range(env.matroid.ground), key=lambda e: (-element_vals[e], e))
    for e in order:
        b = 1 << e
        if chosen & b or element_vals[e] <= TOL:
            continue
        if env.matroid.independent(chosen | b):
            chosen |= b
            total += element_vals[e]
    return total


def matroid_dynamic_prices(env: MatroidEnv, profile) -> PricingRule:
    """Price a set of elements at the drop in residual optimum it causes,
    given the elements already sold.  Additive element values required;
    route structured valuations through compose_max."""
    if not isinstance(env, MatroidEnv):
        raise PricingError("dynamic matroid prices require a matroid environment")
    for i, v in enumerate(profile):
        mask = env.agent_mask(i)
        additive_sum = math.fsum(value(v, 1 << e) for e in env.elements[i])
        if abs(value(v, mask) - additive_sum) > 1e-7:
            raise PricingError(
                "dynamic matroid prices require additive element values; "
                "use compose_max for structured valuations"
            )
    element_vals = _matroid_element_values(env, profile)

    def finite(i, x_i, y):
        taken = env.union_mask(y)
        before = _matroid_residual_value(env, element_vals, taken)
        after = _matroid_residual_value(env, element_vals, taken | x_i)
        return before - after

    return PricingRule(
        env,
        finite,
        static=False,
        anonymous=False,
        provenance={"construction": "matroid", "element_values": element_vals},
    )


# ---------------------------------------------------------------------------
# Critical-value prices for binary single-parameter problems
# ---------------------------------------------------------------------------


class MonotonicityError(PricingError):
    """Critical values decreased along a partial-allocation extension."""

    def __init__(self, witness):
        super().__init__(f"critical values are not monotone: {witness}")
        self.witness = witness


def _extends(y: Allocation, z: Allocation) -> bool:
    return all(a == NULL or a == b for a, b in zip(y, z))


def monotone_critical_prices(
    env,
    profile,
    rule: AllocationRule = OPT_RULE,
    smoothness: tuple[float, float] = (1.0, 1.0),
    cap: int = DEFAULT_CAP,
) -> PricingRule:
    """Post max(own value, critical value) per agent, conditioned on prior
    sales.  Verifies that critical values are non-decreasing along feasible
    extensions before constructing the rule (refusing with a witness
    otherwise).  With a (lam, mu)-smooth underlying rule the construction is
    (1, (mu + 1 + lam) / lam)-balanced against the contraction family."""
    if not is_binary_env(env):
        raise PricingError("critical-value prices require a binary environment")
    tau_cache: dict = {}

    def tau(i: int, y: Allocation):
        y = replace_at(y, i, NULL)
        key = (i, y)
        if key not in tau_cache:
            tau_cache[key] = critical_value(rule, env, profile, i, y, cap)
        return tau_cache[key]

    feasible = enumerate_feasible(env, cap)
    for y in feasible:
        for z in feasible:
            if y == z or not _extends(y, z):
                continue
            for i in range(env.n):
                if z[i] != NULL:
                    continue
                t_small, t_big = tau(i, y), tau(i, z)
                small = math.inf if t_small is UNAVAILABLE else t_small
                big = math.inf if t_big is UNAVAILABLE else t_big
                if small > big + TOL:
                    raise MonotonicityError((i, y, z, small, big))

    lam, mu = smoothness

    def finite(i, x_i, y):
        t = tau(i, y)
        assert t is not UNAVAILABLE  # feasibility was checked by the wrapper
        return max(agent_value(env, profile, i), t)

    return PricingRule(
        env,
        finite,
        static=False,
        anonymous=False,
        provenance={
            "construction": "warmup",
            "rule": rule.kind,
            "declared_beta": (mu + 1.0 + lam) / lam,
        },
    )


# ---------------------------------------------------------------------------
# Reference-allocation prices for binary single-parameter problems
# ---------------------------------------------------------------------------


def _zero_outside(env, profile, members: Allocation):
    out = []
    for i in range(env.n):
        if members[i] != NULL:
            out.append(profile[i])
        else:
            out.append(ScalarValuation(0.0))
    return tuple(out)


def _reference_prices(
    env,
    profile,
    alg_alloc: Allocation,
    rule: AllocationRule,
    name: str,
    cap: int = DEFAULT_CAP,
) -> PricingRule:
    if not is_binary_env(env):
        raise PricingError("reference-allocation prices require a binary environment")

    def run_rule(vals, fixed):
        if rule.kind == "greedy_by_value":
            return greedy(env, vals, fixed)
        return contracted_opt(env, vals, fixed, cap)

    def finite(i, x_i, y):
        ref = alg_alloc
        vals = _zero_outside(env, profile, ref)
        for j in range(1, env.n + 1):
            ref = run_rule(vals, prefix(y, j))
            vals = _zero_outside(env, profile, ref)
        if ref[i] != NULL:
            return agent_value(env, profile, i)
        t = critical_value(rule, env, vals, i, y, cap)
        return 0.0 if t is UNAVAILABLE else t

    return PricingRule(
        env,
        finite,
        static=False,
        anonymous=False,
        provenance={"construction": name, "base_allocation": list(alg_alloc)},
    )


def greedy_derived_prices(env, profile, alg_alloc=None, cap: int = DEFAULT_CAP) -> PricingRule:
    """Prices from nested greedy reference allocations: a reference winner
    pays their value, everyone else the greedy critical value against the
    final reference set."""
    if alg_alloc is None:
        alg_alloc = greedy(env, profile)
    return _reference_prices(
        env, profile, alg_alloc, AllocationRule("greedy_by_value"), "alg1-greedy", cap
    )


def opt_derived_prices(env, profile, alg_alloc=None, cap: int = DEFAULT_CAP) -> PricingRule:
    """Prices from nested residual-optimal reference allocations; the non
    winner price is the welfare externality against the final reference set."""
    if alg_alloc is None:
        alg_alloc = opt(env, profile, cap)
    return _reference_prices(env, profile, alg_alloc, OPT_RULE, "alg2-opt", cap)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def compose_max(
    base_constructor: Callable[[Environment, tuple], PricingRule],
    env,
    profile,
    alg_alloc: Allocation,
    rule: Optional[AllocationRule] = None,
    items: Optional[int] = None,
) -> PricingRule:
    """Price a max-of-simpler-valuations profile with the base construction
    applied to the supporting profile of the reference allocation.

    The balance parameters of the base construction carry over when the
    reference rule is consistent; a welfare drop of the supporting profile
    under re-allocation is recorded as a provenance warning.
    """
    if items is None:
        items = getattr(env, "items", 0) or getattr(getattr(env, "matroid", None), "ground", 0)
    support_profile = tuple(
        supporting_valuation(v, x, items) for v, x in zip(profile, alg_alloc)
    )
    base = base_constructor(env, support_profile)
    provenance = dict(base.provenance)
    provenance["construction"] = f"compose-max({provenance.get('construction')})"
    if rule is not None:
        realloc = rule.run(env, support_profile)
        drop = welfare(support_profile, alg_alloc) - welfare(support_profile, realloc)
        if drop > TOL:
            provenance["consistency_warning"] = drop
    composed = PricingRule(
        env,
        base._finite_price,
        static=base.static,
        anonymous=base.anonymous,
        item_linear=base.item_linear,
        provenance=provenance,
    )
    return composed


def compose_add(product_env: ProductEnv, market_rules: Sequence[PricingRule]) -> PricingRule:
    """Sum of per-market prices on the product environment; a product entry is
    purchasable only when every component is."""
    if len(market_rules) != len(product_env.markets):
        raise PricingError("one pricing rule per market required")

    def finite(i, x_i, y):
        total = 0.0
        for ell, rule in enumerate(market_rules):
            y_ell = product_env.project(y, ell)
            p = rule.price(i, x_i[ell], y_ell)
            if p is UNAVAILABLE:
                return UNAVAILABLE
            total += p
        return total

    def guarded(i, x_i, y):
        p = finite(i, x_i, y)
        if p is UNAVAILABLE:
            raise AssertionError("component unavailable on a feasible product entry")
        return p

    return PricingRule(
        product_env,
        guarded,
        static=all(r.static for r in market_rules),
        anonymous=all(r.anonymous for r in market_rules),
        provenance={
            "construction": "compose-add",
            "markets": [r.provenance.get("construction") for r in market_rules],
        },
    )


# ---------------------------------------------------------------------------
# Expected scaled prices (stochastic transform)
# ---------------------------------------------------------------------------


def expected_scaled_prices(
    env,
    dist,
    constructor: Callable[[tuple], PricingRule],
    params: BalanceParams,
    mode: str = "exact",
    count: int = 10_000,
    seed: int = 0,
    cap: int = 100_000,
) -> PricingRule:
    """Scaled expectation of per-profile pricing rules over a product
    distribution.

    ``constructor`` maps a realized valuation profile to its pricing rule.
    Exact mode enumerates the product support; sampled mode pre-materializes
    ``count`` seeded draws so evaluation stays deterministic.  Entries are
    unavailable only by current feasibility; the per-profile rules in scope
    are finite exactly on feasible entries, so averaging never mixes finite
    and unavailable prices.
    """
    delta = params.scale_factor()
    if mode == "exact":
        weighted = list(dist.profiles(cap))
    elif mode == "sampled":
        draws = dist.sample_profiles(count, seed)
        weighted = [(p, 1.0 / count) for p in draws]
    else:
        raise PricingError(f"unknown mode {mode}")

    rules: dict = {}

    def rule_for(profile) -> PricingRule:
        if profile not in rules:
            rules[profile] = constructor(profile)
        return rules[profile]

    def finite(i, x_i, y):
        acc = []
        for profile, prob in weighted:
            p = rule_for(profile).price(i, x_i, y)
            if p is UNAVAILABLE:
                raise AssertionError(
                    "per-profile price unavailable on a feasible entry"
                )
            acc.append(prob * p)
        return delta * math.fsum(acc)

    return PricingRule(
        env,
        finite,
        static=False,
        anonymous=False,
        provenance={
            "construction": "expected-scaled",
            "delta": delta,
            "mode": mode,
            "count": count if mode == "sampled" else None,
            "seed": seed if mode == "sampled" else None,
            "guarantee": params.welfare_guarantee(),
        },
    )

"""Allocation oracles: brute-force OPT, residual OPT over exchange-compatible
families, greedy, critical values, permeability measurement, and the dense
configuration-LP solver for combinatorial auctions.

Everything here is a pure function of immutable inputs with deterministic
tie-breaking, so downstream pricing rules are reproducible bit for bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    DEFAULT_CAP,
    NULL,
    TOL,
    UNAVAILABLE,
    Allocation,
    CapExceeded,
    CombinatorialAuctionEnv,
    Environment,
    KnapsackEnv,
    MatroidEnv,
    PipEnv,
    ProductEnv,
    SingleItemEnv,
    TableValuation,
    ThresholdValuation,
    Valuation,
    _token_key,
    enumerate_feasible,
    replace_at,
    support,
    value,
    welfare,
)

# ---------------------------------------------------------------------------
# OPT and helpers
# ---------------------------------------------------------------------------


def opt(env: Environment, profile: Sequence[Valuation], cap: int = DEFAULT_CAP) -> Allocation:
    """Welfare-maximizing feasible allocation; ties go to the first maximizer
    in lexicographic enumeration order."""
    best: Optional[Allocation] = None
    best_w = -math.inf
    for alloc in enumerate_feasible(env, cap):
        w = welfare(profile, alloc)
        if w > best_w + TOL:
            best, best_w = alloc, w
    assert best is not None
    return best


def argmax_first(allocs: Sequence[Allocation], profile: Sequence[Valuation]) -> Allocation:
    best: Optional[Allocation] = None
    best_w = -math.inf
    for alloc in allocs:
        w = welfare(profile, alloc)
        if w > best_w + TOL:
            best, best_w = alloc, w
    if best is None:
        raise ValueError("empty allocation list")
    return best


def merge_over(x: Allocation, y: Allocation) -> Allocation:
    """Overlay y onto x where x is null (used for contraction members)."""
    return tuple(xi if xi != NULL else yi for xi, yi in zip(x, y))


def merge_union(env: Environment, x: Allocation, y: Allocation) -> Allocation:
    """Agent-wise union for set-valued outcome kinds."""
    if isinstance(env, (CombinatorialAuctionEnv, MatroidEnv, SingleItemEnv)):
        return tuple(xi | yi for xi, yi in zip(x, y))
    raise TypeError(f"union merge undefined for environment kind {env.kind}")


def allocated_items(x: Allocation) -> int:
    mask = 0
    for xi in x:
        mask |= xi
    return mask


# ---------------------------------------------------------------------------
# Exchange-compatible families
# ---------------------------------------------------------------------------

FAMILY_KINDS = (
    "canonical_contraction",
    "item_disjoint",
    "knapsack_threshold",
    "pip_threshold",
    "single_item_gate",
    "product",
)


@dataclass(frozen=True)
class ExchangeFamily:
    """A family (F_x) of outcome sets that are exchange compatible with x:
    swapping any single agent's member outcome into x stays feasible."""

    kind: str
    env: Environment
    components: tuple["ExchangeFamily", ...] = ()

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown exchange family kind {self.kind}")

    def members_key(self, x: Allocation):
        """Canonical key such that equal keys give equal member lists; lets
        callers deduplicate enumeration across conditioning allocations."""
        if self.kind == "single_item_gate":
            return any(xi != NULL for xi in x)
        if self.kind == "knapsack_threshold":
            return sum(x) < 0.5
        if self.kind == "pip_threshold":
            env = self.env
            assert isinstance(env, PipEnv)
            return tuple(l <= 0.5 + TOL for l in env.load(x))
        if self.kind == "item_disjoint":
            # members depend on x only through the union of allocated items
            return allocated_items(x)
        if self.kind == "product":
            env = self.env
            assert isinstance(env, ProductEnv)
            return tuple(
                fam.members_key(env.project(x, ell))
                for ell, fam in enumerate(self.components)
            )
        return x

    def members(self, x: Allocation, cap: int = DEFAULT_CAP) -> list[Allocation]:
        # A closed exchange set is the singleton {all-null} rather than the
        # empty set: the residual optimum is 0 either way, the null member
        # is trivially exchange compatible, and products of per-market
        # families then decompose market by market.
        if self.kind == "single_item_gate":
            if any(xi != NULL for xi in x):
                return [self.env.null_allocation()]
            return enumerate_feasible(self.env, cap)

        if self.kind == "knapsack_threshold":
            if sum(x) < 0.5:  # strict; grid quantities are exact dyadics
                return enumerate_feasible(self.env, cap)
            return [self.env.null_allocation()]

        if self.kind == "pip_threshold":
            env = self.env
            assert isinstance(env, PipEnv)
            load = env.load(x)
            caps = tuple(1.0 if l <= 0.5 + TOL else 0.0 for l in load)
            out = []
            for y in _enumerate_constrained(env, lambda a: _pip_within(env, a, caps), cap):
                out.append(y)
            return out

        if self.kind == "canonical_contraction":
            return self._canonical_members(x, cap)

        if self.kind == "item_disjoint":
            return self._item_disjoint_members(x, cap)

        if self.kind == "product":
            env = self.env
            assert isinstance(env, ProductEnv)
            per_market = [
                fam.members(env.project(x, ell), cap)
                for ell, fam in enumerate(self.components)
            ]
            out = []
            null = (NULL,) * len(self.components)
            for combo in itertools.product(*per_market):
                y = tuple(
                    tuple(combo[ell][i] for ell in range(len(self.components)))
                    for i in range(env.n)
                )
                y = tuple(yi if yi != null else NULL for yi in y)
                out.append(y)
                if len(out) > cap:
                    raise CapExceeded(len(out), cap)
            return sorted(out, key=lambda a: tuple(_token_key(t) for t in a))

        raise AssertionError(self.kind)

    def _canonical_members(self, x: Allocation, cap: int) -> list[Allocation]:
        env = self.env
        allocated = set(support(x))

        def ok(partial: Allocation) -> bool:
            return env.is_feasible(merge_over(x, partial))

        out = []
        for y in _enumerate_constrained(env, ok, cap, frozen=allocated):
            out.append(y)
        return out

    def _item_disjoint_members(self, x: Allocation, cap: int) -> list[Allocation]:
        env = self.env
        used = allocated_items(x)

        def ok(partial: Allocation) -> bool:
            if allocated_items(partial) & used:
                return False
            return env.is_feasible(merge_union(env, x, partial))

        return list(_enumerate_constrained(env, ok, cap))


def _pip_within(env: PipEnv, alloc: Allocation, caps: tuple[float, ...]) -> bool:
    return all(l <= c + TOL for l, c in zip(env.load(alloc), caps))


def _enumerate_constrained(env, predicate, cap, frozen=frozenset()):
    """DFS over the joint outcome space keeping allocations whose every prefix
    satisfies ``predicate`` (predicates here are downward-closed)."""
    n = env.n
    spaces = [
        (NULL,) if i in frozen else tuple(sorted(env.agent_outcomes(i), key=_token_key))
        for i in range(n)
    ]
    out: list[Allocation] = []
    cur: list = [NULL] * n

    def rec(i: int) -> None:
        if i == n:
            out.append(tuple(cur))
            if len(out) > cap:
                raise CapExceeded(len(out), cap)
            return
        for tok in spaces[i]:
            cur[i] = tok
            if predicate(tuple(cur)):
                rec(i + 1)
        cur[i] = NULL

    rec(0)
    return out


def default_family(env: Environment) -> ExchangeFamily:
    """The family each pricing construction is certified against."""
    if isinstance(env, SingleItemEnv):
        return ExchangeFamily("single_item_gate", env)
    if isinstance(env, KnapsackEnv):
        return ExchangeFamily("knapsack_threshold", env)
    if isinstance(env, PipEnv):
        return ExchangeFamily("pip_threshold", env)
    if isinstance(env, (CombinatorialAuctionEnv, MatroidEnv)):
        return ExchangeFamily("item_disjoint", env)
    if isinstance(env, ProductEnv):
        return ExchangeFamily(
            "product", env, components=tuple(default_family(m) for m in env.markets)
        )
    return ExchangeFamily("canonical_contraction", env)


def residual_opt(
    env: Environment,
    profile: Sequence[Valuation],
    family: ExchangeFamily,
    x: Allocation,
    cap: int = DEFAULT_CAP,
) -> Allocation:
    """Welfare-maximizing member of the exchange set at x (all-null when the
    set is empty)."""
    members = family.members(x, cap)
    if not members:
        return env.null_allocation()
    return argmax_first(members, profile)


# ---------------------------------------------------------------------------
# Binary single-parameter helpers (greedy, critical values, permeability)
# ---------------------------------------------------------------------------


def is_binary_env(env: Environment) -> bool:
    """True when every agent has exactly one non-null outcome (win or lose)."""
    for i in range(env.n):
        if sum(1 for t in env.agent_outcomes(i) if t != NULL) != 1:
            return False
    return True


def _binary_token(env: Environment, i: int):
    """The non-null outcome of agent i in a binary or singleton-element env."""
    toks = [t for t in env.agent_outcomes(i) if t != NULL]
    if len(toks) != 1:
        raise TypeError("environment is not binary single-parameter")
    return toks[0]


def agent_value(env, profile, i) -> float:
    return value(profile[i], _binary_token(env, i))


def binary_profile(env: Environment, bids: Sequence[float]) -> tuple[Valuation, ...]:
    """Valuations worth ``bids[i]`` at agent i's single non-null token."""
    return tuple(
        TableValuation(((_binary_token(env, i), float(b)),)) for i, b in enumerate(bids)
    )


def greedy(env: Environment, profile: Sequence[Valuation], fixed: Optional[Allocation] = None):
    """Greedy allocation by non-increasing value, ties by agent index.

    For binary single-parameter environments, scans agents and accepts when
    feasible together with ``fixed`` and prior acceptances (zero-value agents
    are skipped).  For multi-element matroid environments, repeatedly adds the
    element with the largest marginal gain.
    """
    if fixed is None:
        fixed = env.null_allocation()
    if isinstance(env, MatroidEnv) and not env.binary:
        return _greedy_matroid_elements(env, profile, fixed)
    if not is_binary_env(env):
        raise TypeError(f"greedy undefined for environment kind {env.kind}")
    vals = [agent_value(env, profile, i) for i in range(env.n)]
    order = sorted(range(env.n), key=lambda i: (-vals[i], i))
    chosen = list(env.null_allocation())
    for i in order:
        if fixed[i] != NULL or vals[i] <= TOL:
            continue
        chosen[i] = _binary_token(env, i)
        if not env.is_feasible(merge_over(fixed, tuple(chosen))):
            chosen[i] = NULL
    return tuple(chosen)


def _greedy_matroid_elements(env: MatroidEnv, profile, fixed: Allocation) -> Allocation:
    chosen = list(env.null_allocation())
    blocked = env.union_mask(fixed)
    while True:
        best_gain, best_pick = TOL, None
        for i in range(env.n):
            if fixed[i] != NULL:
                continue
            cur = value(profile[i], chosen[i])
            for e in env.elements[i]:
                b = 1 << e
                if chosen[i] & b or blocked & b:
                    continue
                if not env.matroid.independent(env.union_mask(tuple(chosen)) | blocked | b):
                    continue
                gain = value(profile[i], chosen[i] | b) - cur
                if gain > best_gain + TOL:
                    best_gain, best_pick = gain, (i, b)
        if best_pick is None:
            return tuple(chosen)
        i, b = best_pick
        chosen[i] |= b


@dataclass(frozen=True)
class AllocationRule:
    """Named allocation rule; ``run`` maps (env, profile) to an allocation."""

    kind: str  # opt_bruteforce | greedy_by_value | knapsack_dp | fractional_lp | fixed
    fixed_alloc: Optional[Allocation] = None

    def run(self, env, profile, fixed: Optional[Allocation] = None, cap: int = DEFAULT_CAP):
        if self.kind == "fixed":
            assert self.fixed_alloc is not None
            return self.fixed_alloc
        if self.kind == "opt_bruteforce":
            if fixed is None:
                return opt(env, profile, cap)
            return contracted_opt(env, profile, fixed, cap)
        if self.kind == "greedy_by_value":
            return greedy(env, profile, fixed)
        if self.kind == "knapsack_dp":
            if fixed is not None:
                raise TypeError("knapsack_dp does not support conditioning")
            return knapsack_dp(env, profile)
        if self.kind == "fractional_lp":
            sol = fractional_opt_config_lp(env, profile)
            integral = sol.integral_allocation()
            if integral is None:
                raise ValueError("fractional LP optimum is not integral")
            return integral
        raise ValueError(f"unknown allocation rule kind {self.kind}")


OPT_RULE = AllocationRule("opt_bruteforce")
GREEDY_RULE = AllocationRule("greedy_by_value")


def contracted_opt(env, profile, fixed: Allocation, cap: int = DEFAULT_CAP) -> Allocation:
    """OPT over agents unallocated in ``fixed``, jointly feasible with it
    (first maximizer in enumeration order; zero-value agents stay null)."""
    fam = ExchangeFamily("canonical_contraction", env)
    return residual_opt(env, profile, fam, fixed, cap)


def critical_value(
    rule: AllocationRule,
    env: Environment,
    profile_others: Sequence[Valuation],
    agent: int,
    fixed: Allocation,
    cap: int = DEFAULT_CAP,
):
    """Exact infimum bid at which ``agent`` wins under the rule in the
    subinstance holding ``fixed`` allocated; UNAVAILABLE when no bid wins.

    The win indicator is monotone in the agent's bid for both supported
    rules, and constant between breakpoints, so the infimum is found by a
    finite candidate scan with midpoint probes (open win regions included).
    """
    tok = _binary_token(env, agent)
    if fixed[agent] != NULL or not env.is_feasible(replace_at(fixed, agent, tok)):
        return UNAVAILABLE
    if rule.kind == "opt_bruteforce":
        return _critical_value_opt(env, profile_others, agent, fixed, cap)
    if rule.kind == "greedy_by_value":
        return _critical_value_greedy(env, profile_others, agent, fixed)
    raise ValueError(f"critical values undefined for rule {rule.kind}")


def _critical_value_opt(env, profile, agent, fixed, cap) -> float:
    # externality: best residual welfare without the agent minus best with
    # the agent forced in (counting only the others)
    fam = ExchangeFamily("canonical_contraction", env)
    tok = _binary_token(env, agent)
    without_w = -math.inf
    with_w = -math.inf
    for y in fam.members(fixed, cap):
        others = math.fsum(
            value(profile[j], y[j]) for j in range(env.n) if j != agent
        )
        if y[agent] == NULL and others > without_w:
            without_w = others
        forced = replace_at(y, agent, tok)
        if env.is_feasible(merge_over(fixed, forced)):
            if others > with_w:
                with_w = others
    if with_w == -math.inf:
        return UNAVAILABLE
    return max(0.0, without_w - with_w)


def _critical_value_greedy(env, profile, agent, fixed) -> float:
    others = sorted(
        {
            agent_value(env, profile, j)
            for j in range(env.n)
            if j != agent and agent_value(env, profile, j) > TOL
        }
    )
    candidates = [0.0] + others

    tok = _binary_token(env, agent)

    def wins(bid: float) -> bool:
        trial = list(profile)
        trial[agent] = TableValuation(((tok, bid),))
        out = greedy(env, tuple(trial), fixed)
        return out[agent] != NULL

    # probe just above each candidate: win regions are up-closed with the
    # boundary at a candidate value
    for idx, c in enumerate(candidates):
        upper = candidates[idx + 1] if idx + 1 < len(candidates) else c + 1.0
        if wins((c + upper) / 2.0):
            return c
    return UNAVAILABLE


def permeability(
    env: Environment,
    rule: AllocationRule,
    value_grid: Sequence[float],
    cap: int = DEFAULT_CAP,
):
    """Largest observed ratio of summed critical values of a feasible set to
    the rule's declared welfare, over all grid bid vectors.  A lower bound on
    the continuum quantity; at least 1 by convention.  Returns math.inf when
    some bid vector has zero declared welfare but positive critical-value
    mass."""
    if not is_binary_env(env):
        raise TypeError("permeability requires a binary single-parameter environment")
    grid = sorted(set(float(g) for g in value_grid))
    feasible = enumerate_feasible(env, cap)
    supports = [support(x) for x in feasible]
    n = env.n
    total = len(grid) ** n
    if total > cap:
        raise CapExceeded(total, cap)

    # per agent: supports of allocations excluding / including that agent
    without_i = [
        [s for x, s in zip(feasible, supports) if x[i] == NULL] for i in range(n)
    ]
    with_i = [
        [s for x, s in zip(feasible, supports) if x[i] != NULL] for i in range(n)
    ]

    gamma = 1.0
    tau_cache: dict = {}

    def tau(i: int, bids) -> float:
        key = (i, tuple(b for j, b in enumerate(bids) if j != i))
        if key in tau_cache:
            return tau_cache[key]
        if rule.kind == "opt_bruteforce":
            # externality against the other bids, computed on support lists
            best_without = max(
                (math.fsum(bids[j] for j in s) for s in without_i[i]), default=0.0
            )
            if not with_i[i]:
                t = math.inf
            else:
                best_with = max(
                    math.fsum(bids[j] for j in s if j != i) for s in with_i[i]
                )
                t = max(0.0, best_without - best_with)
        else:
            profile = binary_profile(env, bids)
            t0 = critical_value(rule, env, profile, i, env.null_allocation())
            t = math.inf if t0 is UNAVAILABLE else t0
        tau_cache[key] = t
        return t

    for bids in itertools.product(grid, repeat=n):
        if rule.kind == "opt_bruteforce":
            declared = max(
                (math.fsum(bids[j] for j in s) for s in supports), default=0.0
            )
        else:
            won = rule.run(env, binary_profile(env, bids))
            declared = math.fsum(bids[i] for i in support(won))
        for s in supports:
            num = math.fsum(tau(i, bids) for i in s)
            if num <= TOL:
                continue
            if declared <= TOL:
                return math.inf
            gamma = max(gamma, num / declared)
    return gamma


# ---------------------------------------------------------------------------
# Knapsack dynamic program
# ---------------------------------------------------------------------------


def knapsack_dp(env: KnapsackEnv, profile: Sequence[Valuation]) -> Allocation:
    """Exact optimum for threshold valuations: pick the value-maximal agent
    subset with total demanded size at most 1, by units of the grid step."""
    if not isinstance(env, KnapsackEnv):
        raise TypeError("knapsack_dp requires a knapsack environment")
    units = round(1.0 / env.step)
    sizes = []
    vals = []
    for v in profile:
        if not isinstance(v, ThresholdValuation):
            raise TypeError("knapsack_dp requires threshold valuations")
        u = math.ceil(v.size / env.step - TOL)
        sizes.append(max(0, u))
        vals.append(v.value_at_size)
    # dp[c] = (best value, chosen agent set) using capacity c
    dp: list[tuple[float, tuple[int, ...]]] = [(0.0, ())] * (units + 1)
    for i in range(env.n):
        if vals[i] <= TOL or sizes[i] > units:
            continue
        nxt = dp[:]
        for c in range(sizes[i], units + 1):
            cand_v = dp[c - sizes[i]][0] + vals[i]
            if cand_v > nxt[c][0] + TOL:
                nxt[c] = (cand_v, dp[c - sizes[i]][1] + (i,))
        dp = nxt
    best_v, chosen = max(dp, key=lambda t: t[0])
    alloc = [0.0] * env.n
    for i in chosen:
        alloc[i] = sizes[i] * env.step
    return tuple(alloc)


# ---------------------------------------------------------------------------
# Configuration LP for combinatorial auctions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FractionalSolution:
    """Optimal bundle weights from the configuration LP."""

    env: CombinatorialAuctionEnv
    weights: tuple[tuple[int, int, float], ...]  # (agent, bundle mask, weight)
    objective: float

    def weight(self, i: int, mask: int) -> float:
        for a, m, w in self.weights:
            if a == i and m == mask:
                return w
        return 0.0

    def integral_allocation(self) -> Optional[Allocation]:
        alloc = [NULL] * self.env.n
        for a, m, w in self.weights:
            if w > 1.0 - 1e-6:
                alloc[a] = m
            elif w > 1e-6:
                return None
        out = tuple(alloc)
        return out if self.env.is_feasible(out) else None


def fractional_opt_config_lp(
    env: CombinatorialAuctionEnv, profile: Sequence[Valuation]
) -> FractionalSolution:
    """Solve max sum v_i(S) x_{i,S} subject to per-agent and per-item unit
    caps over all (agent, bundle) pairs, by dense primal simplex."""
    if env.items > 8 or env.n > 6:
        raise CapExceeded(env.n * (1 << env.items), 6 * (1 << 8))
    bundles = [m for m in range(1, 1 << env.items)]
    variables = [(i, m) for i in range(env.n) for m in bundles]
    c = np.array([value(profile[i], m) for i, m in variables])
    rows = []
    rhs = []
    for i in range(env.n):
        rows.append([1.0 if vi == i else 0.0 for vi, _ in variables])
        rhs.append(1.0)
    for j in range(env.items):
        rows.append([1.0 if m >> j & 1 else 0.0 for _, m in variables])
        rhs.append(1.0)
    x, objective = _simplex_max(np.array(rows), np.array(rhs), c)
    weights = tuple(
        (i, m, float(x[k])) for k, (i, m) in enumerate(variables) if x[k] > 1e-9
    )
    return FractionalSolution(env=env, weights=weights, objective=float(objective))


def _simplex_max(A: np.ndarray, b: np.ndarray, c: np.ndarray, max_iter: int = 100_000):
    """Primal simplex with Bland's rule for max c.x s.t. A x <= b, x >= 0,
    b >= 0 (the slack basis is feasible, so no phase one is needed)."""
    m, n = A.shape
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = A
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[m, :n] = -c
    basis = list(range(n, n + m))
    piv_tol = 1e-9
    for _ in range(max_iter):
        enter = -1
        for j in range(n + m):  # Bland: lowest eligible index
            if tableau[m, j] < -piv_tol:
                enter = j
                break
        if enter < 0:
            break
        leave, best_ratio = -1, math.inf
        for r in range(m):
            if tableau[r, enter] > piv_tol:
                ratio = tableau[r, -1] / tableau[r, enter]
                if ratio < best_ratio - piv_tol or (
                    abs(ratio - best_ratio) <= piv_tol
                    and (leave < 0 or basis[r] < basis[leave])
                ):
                    leave, best_ratio = r, ratio
        if leave < 0:
            raise ArithmeticError("LP unbounded (cannot happen with unit caps)")
        piv = tableau[leave, enter]
        tableau[leave, :] /= piv
        for r in range(m + 1):
            if r != leave and abs(tableau[r, enter]) > 0:
                tableau[r, :] -= tableau[r, enter] * tableau[leave, :]
        basis[leave] = enter
    else:
        raise ArithmeticError(f"simplex did not converge within {max_iter} iterations")
    x = np.zeros(n + m)
    for r, bi in enumerate(basis):
        x[bi] = tableau[r, -1]
    return x[:n], tableau[m, -1]

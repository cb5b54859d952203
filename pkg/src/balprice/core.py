"""Domain types for agents, outcomes, feasibility environments, and valuations.

Allocations are plain tuples of per-agent outcome tokens.  The null outcome is
always the numeric token ``0`` (the empty bitmask for set-valued kinds, the
zero quantity for divisible kinds), so restriction and welfare arithmetic need
no per-kind special cases.  All types here are immutable after construction
and safe to share across workers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

TOL = 1e-9

NULL = 0

Allocation = tuple

MAX_ITEMS = 16


class Unavailable:
    """Marker for menu entries priced at infinity (infeasible purchases).

    Never participates in arithmetic; comparisons must check identity against
    the UNAVAILABLE singleton.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNAVAILABLE"


UNAVAILABLE = Unavailable()


class CapExceeded(Exception):
    """Enumeration or search exceeded the configured resource cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"enumeration exceeded cap: {count} > {cap}")
        self.count = count
        self.cap = cap


def restrict(alloc: Allocation, agents: Iterable[int]) -> Allocation:
    """Zero out every agent not in ``agents``."""
    keep = set(agents)
    return tuple(x if i in keep else NULL for i, x in enumerate(alloc))


def prefix(alloc: Allocation, k: int) -> Allocation:
    """Zero out agents k, k+1, ..., n-1 (keep the first k)."""
    return alloc[:k] + (NULL,) * (len(alloc) - k)


def replace_at(alloc: Allocation, i: int, outcome) -> Allocation:
    return alloc[:i] + (outcome,) + alloc[i + 1 :]


def support(alloc: Allocation) -> tuple[int, ...]:
    """Indices of agents with a non-null outcome."""
    return tuple(i for i, x in enumerate(alloc) if x != NULL)


def bitmask_items(mask: int) -> tuple[int, ...]:
    return tuple(j for j in range(MAX_ITEMS) if mask >> j & 1)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


# ---------------------------------------------------------------------------
# Valuations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdditiveValuation:
    """Per-item values; the value of a bitmask is the sum over its set bits."""

    values: tuple[float, ...]

    kind = "additive"

    def value(self, x) -> float:
        _check_mask(x)
        return math.fsum(self.values[j] for j in bitmask_items(x))


@dataclass(frozen=True)
class XosValuation:
    """Maximum over additive clauses (each clause a per-item value vector)."""

    clauses: tuple[tuple[float, ...], ...]

    kind = "xos"

    def value(self, x) -> float:
        _check_mask(x)
        if not self.clauses:
            return 0.0
        return max(math.fsum(c[j] for j in bitmask_items(x)) for c in self.clauses)

    def supporting_clause(self, x) -> int:
        """Index of the first clause attaining the maximum on ``x``."""
        best, arg = -1.0, 0
        for idx, c in enumerate(self.clauses):
            s = math.fsum(c[j] for j in bitmask_items(x))
            if s > best + TOL:
                best, arg = s, idx
        return arg


# A hypergraph clause is a tuple of (edge bitmask, weight >= 0) pairs.
MphClause = tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class MphValuation:
    """Maximum over positive-hypergraph clauses of bounded edge size."""

    clauses: tuple[MphClause, ...]

    kind = "mph"

    def __post_init__(self):
        for clause in self.clauses:
            for edge, w in clause:
                if w < 0:
                    raise ValueError(f"negative hyperedge weight {w}")
                if edge == 0:
                    raise ValueError("empty hyperedge")

    @property
    def rank(self) -> int:
        sizes = [popcount(e) for clause in self.clauses for e, _ in clause]
        return max(sizes) if sizes else 1

    def clause_value(self, idx: int, x) -> float:
        return math.fsum(w for e, w in self.clauses[idx] if e & x == e)

    def value(self, x) -> float:
        _check_mask(x)
        if not self.clauses:
            return 0.0
        return max(self.clause_value(i, x) for i in range(len(self.clauses)))

    def supporting_clause(self, x) -> int:
        best, arg = -1.0, 0
        for idx in range(len(self.clauses)):
            s = self.clause_value(idx, x)
            if s > best + TOL:
                best, arg = s, idx
        return arg


@dataclass(frozen=True)
class ThresholdValuation:
    """All-or-nothing value for receiving at least ``size`` units."""

    value_at_size: float
    size: float

    kind = "knapsack_threshold"

    def value(self, x) -> float:
        q = float(x)
        return self.value_at_size if q >= self.size - TOL else 0.0


@dataclass(frozen=True)
class ScalarValuation:
    """Linear value: outcome 1 is worth ``rate``; fractional levels scale."""

    rate: float

    kind = "scalar"

    def value(self, x) -> float:
        return self.rate * float(x)


@dataclass(frozen=True)
class TableValuation:
    """Explicit outcome-token -> value map; unknown tokens are a domain error."""

    entries: tuple[tuple[object, float], ...]

    kind = "table"

    def value(self, x) -> float:
        if x == NULL:
            return 0.0
        for token, v in self.entries:
            if token == x:
                return v
        raise KeyError(f"outcome {x!r} not in table valuation")


@dataclass(frozen=True)
class MarketValuation:
    """Additive across markets: the outcome is a tuple of per-market outcomes."""

    parts: tuple["Valuation", ...]

    kind = "product"

    def value(self, x) -> float:
        if x == NULL:
            return 0.0
        if len(x) != len(self.parts):
            raise ValueError("product outcome arity mismatch")
        return math.fsum(value(p, xi) for p, xi in zip(self.parts, x))


Valuation = Union[
    AdditiveValuation,
    XosValuation,
    MphValuation,
    ThresholdValuation,
    ScalarValuation,
    TableValuation,
    MarketValuation,
]

ValuationProfile = tuple


def _check_mask(x) -> None:
    if not isinstance(x, int) or x < 0:
        raise KeyError(f"expected item bitmask, got {x!r}")


def value(v: Valuation, x) -> float:
    """Value of outcome ``x`` under valuation ``v``; value(NULL) is always 0."""
    if x == NULL:
        return 0.0
    return v.value(x)


def welfare(profile: Sequence[Valuation], alloc: Allocation) -> float:
    if len(profile) != len(alloc):
        raise ValueError("profile and allocation lengths differ")
    return math.fsum(value(v, x) for v, x in zip(profile, alloc))


# ---------------------------------------------------------------------------
# Matroids
# ---------------------------------------------------------------------------

K4_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@dataclass(frozen=True)
class Matroid:
    """Independence oracle over a ground set of at most MAX_ITEMS elements.

    kind is one of uniform | partition | graphic_k4.
    """

    kind: str
    ground: int
    rank_bound: int = 0
    blocks: tuple[tuple[int, ...], ...] = ()
    capacities: tuple[int, ...] = ()

    def __post_init__(self):
        if self.ground > MAX_ITEMS:
            raise ValueError(f"at most {MAX_ITEMS} ground elements supported")

    @staticmethod
    def uniform(rank: int, ground: int) -> "Matroid":
        return Matroid(kind="uniform", ground=ground, rank_bound=rank)

    @staticmethod
    def partition(blocks: Sequence[Sequence[int]], capacities: Sequence[int]) -> "Matroid":
        ground = max((e for b in blocks for e in b), default=-1) + 1
        return Matroid(
            kind="partition",
            ground=ground,
            blocks=tuple(tuple(b) for b in blocks),
            capacities=tuple(capacities),
        )

    @staticmethod
    def graphic_k4() -> "Matroid":
        return Matroid(kind="graphic_k4", ground=len(K4_EDGES))

    def independent(self, mask: int) -> bool:
        if mask >> self.ground:
            return False
        if self.kind == "uniform":
            return popcount(mask) <= self.rank_bound
        if self.kind == "partition":
            for block, cap in zip(self.blocks, self.capacities):
                if sum(1 for e in block if mask >> e & 1) > cap:
                    return False
            return True
        if self.kind == "graphic_k4":
            return self._acyclic(mask)
        raise ValueError(f"unknown matroid kind {self.kind}")

    def _acyclic(self, mask: int) -> bool:
        parent = list(range(4))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in bitmask_items(mask):
            u, v = K4_EDGES[e]
            ru, rv = find(u), find(v)
            if ru == rv:
                return False
            parent[ru] = rv
        return True


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------


def _submasks(mask: int) -> list[int]:
    bits = bitmask_items(mask)
    out = []
    for r in range(len(bits) + 1):
        for combo in itertools.combinations(bits, r):
            m = 0
            for b in combo:
                m |= 1 << b
            out.append(m)
    return sorted(out)


class EnvironmentBase:
    """Shared behaviour: outcome-space access, enumeration, validation."""

    kind: str
    n: int

    def agent_outcomes(self, i: int) -> tuple:
        raise NotImplementedError

    def is_feasible(self, alloc: Allocation) -> bool:
        raise NotImplementedError

    def null_allocation(self) -> Allocation:
        return (NULL,) * self.n


@dataclass(frozen=True)
class SingleItemEnv(EnvironmentBase):
    n: int

    kind = "single_item"

    def agent_outcomes(self, i: int) -> tuple:
        return (0, 1)

    def is_feasible(self, alloc: Allocation) -> bool:
        return sum(alloc) <= 1


@dataclass(frozen=True)
class MatroidEnv(EnvironmentBase):
    """Ground-set elements partitioned among agents; an allocation is feasible
    when the union of the selected element masks is independent."""

    n: int
    matroid: Matroid
    elements: tuple[tuple[int, ...], ...]

    kind = "matroid"

    def __post_init__(self):
        seen: set[int] = set()
        for owned in self.elements:
            for e in owned:
                if e in seen:
                    raise ValueError(f"element {e} owned by two agents")
                seen.add(e)

    def agent_mask(self, i: int) -> int:
        m = 0
        for e in self.elements[i]:
            m |= 1 << e
        return m

    def agent_outcomes(self, i: int) -> tuple:
        return tuple(_submasks(self.agent_mask(i)))

    def union_mask(self, alloc: Allocation) -> int:
        m = 0
        for x in alloc:
            m |= x
        return m

    def is_feasible(self, alloc: Allocation) -> bool:
        for i, x in enumerate(alloc):
            if x & ~self.agent_mask(i):
                return False
        return self.matroid.independent(self.union_mask(alloc))

    @property
    def binary(self) -> bool:
        return all(len(owned) == 1 for owned in self.elements)


@dataclass(frozen=True)
class CombinatorialAuctionEnv(EnvironmentBase):
    """Item bitmask outcomes; feasible when assigned bundles are disjoint."""

    n: int
    items: int
    fractional: bool = False

    def __post_init__(self):
        if self.items > MAX_ITEMS:
            raise ValueError(f"at most {MAX_ITEMS} items supported, got {self.items}")

    @property
    def kind(self) -> str:  # type: ignore[override]
        return "fractional_ca" if self.fractional else "combinatorial_auction"

    def agent_outcomes(self, i: int) -> tuple:
        return tuple(range(1 << self.items))

    def is_feasible(self, alloc: Allocation) -> bool:
        used = 0
        for x in alloc:
            if x & used:
                return False
            used |= x
        return True


@dataclass(frozen=True)
class KnapsackEnv(EnvironmentBase):
    """One divisible unit of capacity; outcomes are grid quantities in
    [0, max_share].  Instances whose demands stay at or below half the
    capacity use max_share = 1/2, which is what keeps the full feasible set
    exchange compatible below the half-load threshold."""

    n: int
    step: float = 0.125
    max_share: float = 1.0

    kind = "knapsack"

    def agent_outcomes(self, i: int) -> tuple:
        levels = round(self.max_share / self.step)
        return tuple(k * self.step for k in range(levels + 1))

    def is_feasible(self, alloc: Allocation) -> bool:
        if any(q > self.max_share + TOL for q in alloc):
            return False
        return sum(alloc) <= 1.0 + TOL


@dataclass(frozen=True)
class PipEnv(EnvironmentBase):
    """Packing constraints A x <= c with binary demand levels per agent."""

    n: int
    matrix: tuple[tuple[float, ...], ...]
    capacities: tuple[float, ...]

    kind = "pip"

    def __post_init__(self):
        for row in self.matrix:
            if len(row) != self.n:
                raise ValueError("constraint row length != agent count")
            for a in row:
                if a < -TOL or a > 0.5 + TOL:
                    raise ValueError(f"coefficient {a} outside [0, 1/2]")
        for c in self.capacities:
            if abs(c - 1.0) > TOL:
                raise ValueError("capacities must be 1")

    @property
    def rows(self) -> int:
        return len(self.matrix)

    def load(self, alloc: Allocation) -> tuple[float, ...]:
        return tuple(
            math.fsum(row[i] * float(alloc[i]) for i in range(self.n)) for row in self.matrix
        )

    def column_sparsity(self, i: int) -> int:
        return sum(1 for row in self.matrix if row[i] > TOL)

    def agent_outcomes(self, i: int) -> tuple:
        return (0, 1)

    def is_feasible(self, alloc: Allocation) -> bool:
        return all(l <= c + TOL for l, c in zip(self.load(alloc), self.capacities))


@dataclass(frozen=True)
class ExplicitEnv(EnvironmentBase):
    """Feasibility by membership in an explicit allocation list."""

    n: int
    outcome_tokens: tuple[tuple[object, ...], ...]
    feasible_set: frozenset

    kind = "explicit"

    def __post_init__(self):
        for tokens in self.outcome_tokens:
            if NULL not in tokens:
                raise ValueError("every agent's outcome space must contain the null token 0")
        if self.null_allocation() not in self.feasible_set:
            raise ValueError("the all-null allocation must be feasible")

    def agent_outcomes(self, i: int) -> tuple:
        return tuple(sorted(self.outcome_tokens[i], key=_token_key))

    def is_feasible(self, alloc: Allocation) -> bool:
        return alloc in self.feasible_set


@dataclass(frozen=True)
class ProductEnv(EnvironmentBase):
    """Independent markets sharing the same agents; outcomes are tuples of
    per-market outcomes and feasibility is market-wise."""

    markets: tuple[EnvironmentBase, ...]

    kind = "product"

    def __post_init__(self):
        ns = {m.n for m in self.markets}
        if len(ns) != 1:
            raise ValueError("all markets must share the agent count")

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.markets[0].n

    def agent_outcomes(self, i: int) -> tuple:
        per_market = [m.agent_outcomes(i) for m in self.markets]
        out = [combo for combo in itertools.product(*per_market)]
        null = (NULL,) * len(self.markets)
        return tuple(x if x != null else NULL for x in sorted(out))

    def project(self, alloc: Allocation, market: int) -> Allocation:
        return tuple(
            NULL if x == NULL else x[market] for x in alloc
        )

    def is_feasible(self, alloc: Allocation) -> bool:
        for x in alloc:
            if x != NULL and len(x) != len(self.markets):
                return False
        return all(
            m.is_feasible(self.project(alloc, ell)) for ell, m in enumerate(self.markets)
        )


Environment = Union[
    SingleItemEnv,
    MatroidEnv,
    CombinatorialAuctionEnv,
    KnapsackEnv,
    PipEnv,
    ExplicitEnv,
    ProductEnv,
]


def _token_key(tok):
    # ints sort before tuple tokens; mixed spaces stay deterministic
    if isinstance(tok, tuple):
        return (1, tok)
    return (0, (tok,))


DEFAULT_CAP = 200_000


def enumerate_feasible(env: Environment, cap: int = DEFAULT_CAP) -> list[Allocation]:
    """All feasible allocations in lexicographic token order (agent 0 most
    significant).  Raises CapExceeded when the count passes ``cap``.

    Partial allocations are pruned via downward closure: a prefix with
    trailing nulls that is already infeasible cannot be completed.
    """
    n = env.n
    spaces = [sorted(env.agent_outcomes(i), key=_token_key) for i in range(n)]
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
            if env.is_feasible(tuple(cur)):
                rec(i + 1)
        cur[i] = NULL

    rec(0)
    return out


def check_downward_closed(env: Environment, cap: int = DEFAULT_CAP) -> bool:
    """Exhaustively verify that every restriction of a feasible allocation is
    feasible (desk-scale environments only)."""
    for alloc in enumerate_feasible(env, cap):
        agents = support(alloc)
        for r in range(len(agents) + 1):
            for subset in itertools.combinations(agents, r):
                if not env.is_feasible(restrict(alloc, subset)):
                    return False
    return True

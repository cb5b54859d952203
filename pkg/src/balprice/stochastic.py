"""Product distributions over valuations, exact expectation and Monte Carlo
estimation of optimum and mechanism welfare, and competitive-ratio reports.

Monte Carlo trials draw from counter-based Philox streams keyed by
(seed, trial index), so estimates are bit-for-bit reproducible and
independent of evaluation order or parallel schedule.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    TOL,
    CapExceeded,
    Environment,
    Valuation,
    welfare,
)
from .mechanism import OnlinePostedPriceRunner, expected_posted_price_welfare
from .oracle import opt

EXACT_SUPPORT_CAP = 100_000


@dataclass(frozen=True)
class ProductDistribution:
    """Independent per-agent finite supports: (valuation, probability) atoms."""

    supports: tuple[tuple[tuple[Valuation, float], ...], ...]

    def __post_init__(self):
        for i, atoms in enumerate(self.supports):
            total = math.fsum(p for _, p in atoms)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"agent {i} probabilities sum to {total}, not 1")
            if any(p < -TOL for _, p in atoms):
                raise ValueError(f"agent {i} has a negative probability")

    @staticmethod
    def deterministic(profile: Sequence[Valuation]) -> "ProductDistribution":
        return ProductDistribution(tuple(((v, 1.0),) for v in profile))

    @property
    def n(self) -> int:
        return len(self.supports)

    def atoms(self, i: int):
        return self.supports[i]

    def support_size(self) -> int:
        size = 1
        for atoms in self.supports:
            size *= len(atoms)
        return size

    def profiles(self, cap: int = EXACT_SUPPORT_CAP):
        """All (profile, probability) pairs of the product support."""
        if self.support_size() > cap:
            raise CapExceeded(self.support_size(), cap)
        for combo in itertools.product(*self.supports):
            prob = math.prod(p for _, p in combo)
            yield tuple(v for v, _ in combo), prob

    def sample(self, rng: np.random.Generator) -> tuple[Valuation, ...]:
        out = []
        for atoms in self.supports:
            u = rng.random()
            acc = 0.0
            pick = atoms[-1][0]
            for v, p in atoms:
                acc += p
                if u < acc:
                    pick = v
                    break
            out.append(pick)
        return tuple(out)

    def sample_profiles(self, count: int, seed: int) -> list[tuple[Valuation, ...]]:
        return [self.sample(trial_rng(seed, k)) for k in range(count)]


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one trial; streams never overlap across
    trials and do not depend on draw order elsewhere."""
    key = np.array([seed % 2**64, trial % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def exact_expectation(
    dist: ProductDistribution,
    f: Callable[[tuple], float],
    cap: int = EXACT_SUPPORT_CAP,
) -> float:
    """Sum of prob * f(profile) over the full product support."""
    return math.fsum(prob * f(profile) for profile, prob in dist.profiles(cap))


def expected_opt(env: Environment, dist: ProductDistribution, cap: int = EXACT_SUPPORT_CAP) -> float:
    return exact_expectation(dist, lambda p: welfare(p, opt(env, p)), cap)


@dataclass(frozen=True)
class RatioEstimate:
    expected_mechanism_welfare: float
    expected_opt: float
    ratio: float
    mode: str  # exact | monte_carlo
    trials: int = 0
    seed: int = 0
    ci95_halfwidth: float = 0.0

    def as_dict(self) -> dict:
        return {
            "expected_mechanism_welfare": self.expected_mechanism_welfare,
            "expected_opt": self.expected_opt,
            "ratio": self.ratio,
            "mode": self.mode,
            "trials": self.trials,
            "seed": self.seed,
            "ci95_halfwidth": self.ci95_halfwidth,
        }


def exact_ratio(
    env: Environment,
    prices,
    dist: ProductDistribution,
    order: Optional[Sequence[int]] = None,
    tie: str = "adversarial_min_welfare",
    cap: int = EXACT_SUPPORT_CAP,
) -> RatioEstimate:
    """Exact expected mechanism welfare over the product support divided by
    the exact expected optimum.  Tie choices condition on realized history
    only (see expected_posted_price_welfare)."""
    if order is None:
        order = tuple(range(env.n))
    mech = expected_posted_price_welfare(env, prices, dist, order, tie)
    benchmark = expected_opt(env, dist, cap)
    if benchmark <= TOL:
        raise ZeroDivisionError("expected optimum is zero; ratio undefined")
    return RatioEstimate(mech, benchmark, mech / benchmark, mode="exact")


def _ratio_ci95(ws: list[float], os_: list[float]) -> float:
    """Normal-approximation half-width for a ratio of means (delta method
    with the welfare/optimum covariance)."""
    n = len(ws)
    if n < 2:
        return 0.0
    wbar = math.fsum(ws) / n
    obar = math.fsum(os_) / n
    if obar <= TOL:
        return math.inf
    var_w = math.fsum((w - wbar) ** 2 for w in ws) / (n - 1)
    var_o = math.fsum((o - obar) ** 2 for o in os_) / (n - 1)
    cov = math.fsum((w - wbar) * (o - obar) for w, o in zip(ws, os_)) / (n - 1)
    r = wbar / obar
    var_ratio = (var_w + r * r * var_o - 2.0 * r * cov) / (obar * obar * n)
    return 1.96 * math.sqrt(max(0.0, var_ratio))


def monte_carlo_ratio(
    env: Environment,
    prices,
    dist: ProductDistribution,
    order_mode: str = "fixed",
    trials: int = 1000,
    seed: int = 0,
    tie: str = "adversarial_min_welfare",
    fixed_order: Optional[Sequence[int]] = None,
    order_samples: int = 20,
) -> RatioEstimate:
    """Sampled competitive ratio: per trial, draw a profile from its Philox
    stream, run the mechanism under the requested order mode, and accumulate
    welfare against the per-trial optimum.  Tie choices are
    history-conditioned (runners share their continuation memo across
    trials)."""
    if trials < 1:
        raise ValueError("at least one trial required")
    if order_mode not in ("fixed", "random", "worst_sampled"):
        raise ValueError(f"unknown order mode {order_mode}")
    base_order = tuple(fixed_order) if fixed_order is not None else tuple(range(env.n))

    runners: dict[tuple, OnlinePostedPriceRunner] = {}

    def run(order, profile) -> float:
        if order not in runners:
            runners[order] = OnlinePostedPriceRunner(env, prices, dist, order, tie)
        return runners[order].run(profile).welfare

    ws: list[float] = []
    os_: list[float] = []
    for t in range(trials):
        rng = trial_rng(seed, t)
        profile = dist.sample(rng)
        if order_mode == "fixed":
            w = run(base_order, profile)
        elif order_mode == "random":
            w = run(tuple(int(i) for i in rng.permutation(env.n)), profile)
        else:
            count = min(order_samples, math.factorial(env.n))
            seen = set()
            while len(seen) < count:
                seen.add(tuple(int(i) for i in rng.permutation(env.n)))
            w = min(run(order, profile) for order in sorted(seen))
        ws.append(w)
        os_.append(welfare(profile, opt(env, profile)))

    mech = math.fsum(ws) / trials
    benchmark = math.fsum(os_) / trials
    if benchmark <= TOL:
        raise ZeroDivisionError("sampled expected optimum is zero; ratio undefined")
    return RatioEstimate(
        mech,
        benchmark,
        mech / benchmark,
        mode="monte_carlo",
        trials=trials,
        seed=seed,
        ci95_halfwidth=_ratio_ci95(ws, os_),
    )


def worst_order_expected_welfare(
    env, prices, dist: ProductDistribution, tie: str = "adversarial_min_welfare",
    cap: int = EXACT_SUPPORT_CAP,
) -> float:
    """Minimum over fixed arrival orders of the exact expected welfare."""
    worst = math.inf
    for order in itertools.permutations(range(env.n)):
        worst = min(worst, expected_posted_price_welfare(env, prices, dist, order, tie))
    return worst

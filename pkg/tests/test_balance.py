import itertools
import math

import pytest

from balprice.balance import (
    _PriceSums,
    check_balanced,
    check_weakly_balanced,
    minimal_beta,
)
from balprice.core import (
    AdditiveValuation,
    CombinatorialAuctionEnv,
    KnapsackEnv,
    Matroid,
    MatroidEnv,
    MphValuation,
    PipEnv,
    ScalarValuation,
    SingleItemEnv,
    TableValuation,
    ThresholdValuation,
    enumerate_feasible,
    welfare,
)
from balprice.oracle import default_family, opt
from balprice.pricing import (
    BalanceParams,
    knapsack_prices,
    matroid_dynamic_prices,
    mphk_item_prices,
    pip_prices,
    scaled_prices,
    single_item_prices,
)


def bit(*items):
    m = 0
    for j in items:
        m |= 1 << j
    return m


def uniform_matroid_env(rank, n):
    return MatroidEnv(
        n=n, matroid=Matroid.uniform(rank, n), elements=tuple((i,) for i in range(n))
    )


def element_profile(env, *vals):
    return tuple(
        TableValuation(((1 << env.elements[i][0], float(v)),)) for i, v in enumerate(vals)
    )


class TestSingleItemBalance:
    def setup_method(self):
        self.env = SingleItemEnv(n=2)
        self.profile = (ScalarValuation(1.0), ScalarValuation(2.0))
        self.rule = single_item_prices(self.env, self.profile)
        self.alloc = opt(self.env, self.profile)
        self.family = default_family(self.env)

    def test_one_one_passes_all_orders(self):
        report = check_balanced(
            self.env, self.profile, self.rule, self.alloc, self.family,
            BalanceParams(alpha=1.0, beta=1.0),
        )
        assert report.passed
        assert report.condition_a_min_slack >= -1e-9
        assert report.condition_b_min_slack >= -1e-9

    def test_tight_beta_fails(self):
        report = check_balanced(
            self.env, self.profile, self.rule, self.alloc, self.family,
            BalanceParams(alpha=1.0, beta=0.4),
        )
        assert not report.passed
        assert any(w[0] == "b" for w in report.witnesses)

    def test_minimal_beta_is_one(self):
        assert minimal_beta(
            self.env, self.profile, self.rule, self.alloc, self.family, alpha=1.0
        ) == pytest.approx(1.0)

    def test_minimal_beta_scales_linearly(self):
        doubled = scaled_prices(self.rule, 2.0)
        assert minimal_beta(
            self.env, self.profile, doubled, self.alloc, self.family, alpha=1.0
        ) == pytest.approx(2.0)

    def test_zero_prices_minimal_beta_zero(self):
        zero = scaled_prices(self.rule, 0.0)
        assert minimal_beta(
            self.env, self.profile, zero, self.alloc, self.family, alpha=1.0
        ) == pytest.approx(0.0)

    def test_unbounded_when_residual_zero_with_positive_prices(self):
        from balprice.pricing import PricingRule

        env = SingleItemEnv(n=2)
        profile = (ScalarValuation(0.0), ScalarValuation(0.0))
        rule = PricingRule(
            env, lambda i, x, y: 1.0, static=True, anonymous=True,
            provenance={"construction": "fixed"},
        )
        assert minimal_beta(
            env, profile, rule, (0, 0), default_family(env), alpha=1.0
        ) == math.inf

    def test_certification_monotone_in_params(self):
        for beta in (1.0, 1.5, 4.0):
            report = check_balanced(
                self.env, self.profile, self.rule, self.alloc, self.family,
                BalanceParams(alpha=1.0, beta=beta),
            )
            assert report.passed
        for alpha in (1.0, 2.0):
            report = check_balanced(
                self.env, self.profile, self.rule, self.alloc, self.family,
                BalanceParams(alpha=alpha, beta=1.0),
            )
            assert report.passed


class TestMatroidBalance:
    def test_dynamic_prices_one_one(self):
        env = uniform_matroid_env(2, 3)
        profile = element_profile(env, 3, 2, 1)
        rule = matroid_dynamic_prices(env, profile)
        report = check_balanced(
            env, profile, rule, opt(env, profile), default_family(env),
            BalanceParams(alpha=1.0, beta=1.0),
        )
        assert report.passed

    def test_partition_matroid(self):
        env = MatroidEnv(
            n=4,
            matroid=Matroid.partition(((0, 1), (2, 3)), (1, 1)),
            elements=((0,), (1,), (2,), (3,)),
        )
        profile = element_profile(env, 4, 1, 3, 2)
        rule = matroid_dynamic_prices(env, profile)
        report = check_balanced(
            env, profile, rule, opt(env, profile), default_family(env),
            BalanceParams(alpha=1.0, beta=1.0),
        )
        assert report.passed


class TestWeakBalance:
    def test_mph2_pair_instance(self):
        env = CombinatorialAuctionEnv(n=2, items=2)
        profile = (
            MphValuation((((bit(0, 1), 4.0),),)),
            AdditiveValuation((1.0, 1.0)),
        )
        alloc = opt(env, profile)
        rule = mphk_item_prices(env, profile, alloc)
        report = check_weakly_balanced(
            env, profile, rule, alloc, default_family(env),
            BalanceParams(alpha=1.0, beta1=1.0, beta2=1.0),
        )
        assert report.passed

    def test_knapsack_strong_two_one(self):
        # the per-unit prices satisfy (2, 1): committing at least half the
        # capacity recovers half the reference welfare (condition a), and any
        # exchange member pays at most one reference welfare (condition b)
        env = KnapsackEnv(n=2, step=0.25)
        profile = (ThresholdValuation(1.0, 0.5), ThresholdValuation(1.0, 0.5))
        alloc = opt(env, profile)
        rule = knapsack_prices(env, profile, welfare(profile, alloc))
        report = check_balanced(
            env, profile, rule, alloc, default_family(env),
            BalanceParams(alpha=2.0, beta=1.0),
        )
        assert report.passed
        # restated in the weak form with the same bounds
        report2 = check_weakly_balanced(
            env, profile, rule, alloc, default_family(env),
            BalanceParams(alpha=2.0, beta1=1.0, beta2=0.0),
        )
        assert report2.passed

    def test_knapsack_alpha_one_fails(self):
        # regression: with alpha=1 condition (a) fails, e.g. x=(0.75, 0)
        # pays 1.5 against a full reference welfare of 2 and empty exchange set
        env = KnapsackEnv(n=2, step=0.25)
        profile = (ThresholdValuation(1.0, 0.5), ThresholdValuation(1.0, 0.5))
        alloc = opt(env, profile)
        rule = knapsack_prices(env, profile, welfare(profile, alloc))
        report = check_balanced(
            env, profile, rule, alloc, default_family(env),
            BalanceParams(alpha=1.0, beta=2.0),
        )
        assert not report.passed
        assert any(w[0] == "a" for w in report.witnesses)

    def test_pip_integral_two_zero_d(self):
        env = PipEnv(n=2, matrix=((0.5, 0.5),), capacities=(1.0,))
        profile = (ScalarValuation(1.0), ScalarValuation(1.0))
        alloc = opt(env, profile)
        rule = pip_prices(env, profile, alloc)
        report = check_weakly_balanced(
            env, profile, rule, alloc, default_family(env),
            BalanceParams(alpha=2.0, beta1=0.0, beta2=1.0),
        )
        assert report.passed

    def test_form_mismatch_raises(self):
        env = SingleItemEnv(n=2)
        profile = (ScalarValuation(1.0), ScalarValuation(2.0))
        rule = single_item_prices(env, profile)
        with pytest.raises(ValueError):
            check_balanced(
                env, profile, rule, opt(env, profile), default_family(env),
                BalanceParams(alpha=1.0, beta1=1.0, beta2=0.0),
            )


class TestOrderDp:
    def test_extremal_matches_permutation_brute_force(self):
        env = uniform_matroid_env(2, 3)
        profile = element_profile(env, 3, 2, 1)
        rule = matroid_dynamic_prices(env, profile)
        for x in enumerate_feasible(env):
            sums = _PriceSums(rule, x, env.n)
            lo_dp, _, _ = sums.extremal(x, maximize=False)
            hi_dp, _, _ = sums.extremal(x, maximize=True)
            per_order = [
                sums.declared_order(x, order)[0]
                for order in itertools.permutations(range(env.n))
            ]
            assert lo_dp == pytest.approx(min(per_order))
            assert hi_dp == pytest.approx(max(per_order))

    def test_declared_vs_all_orders_consistency(self):
        env = uniform_matroid_env(2, 3)
        profile = element_profile(env, 3, 2, 1)
        rule = matroid_dynamic_prices(env, profile)
        alloc = opt(env, profile)
        fam = default_family(env)
        params = BalanceParams(alpha=1.0, beta=1.0)
        all_orders = check_balanced(env, profile, rule, alloc, fam, params)
        assert all_orders.passed
        for order in itertools.permutations(range(env.n)):
            declared = check_balanced(
                env, profile, rule, alloc, fam, params,
                order=order, order_mode="declared",
            )
            assert declared.passed

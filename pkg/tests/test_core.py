import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balprice.core import (
    NULL,
    AdditiveValuation,
    CapExceeded,
    CombinatorialAuctionEnv,
    ExplicitEnv,
    KnapsackEnv,
    Matroid,
    MatroidEnv,
    MphValuation,
    PipEnv,
    ProductEnv,
    ScalarValuation,
    SingleItemEnv,
    TableValuation,
    ThresholdValuation,
    XosValuation,
    check_downward_closed,
    enumerate_feasible,
    prefix,
    restrict,
    support,
    value,
    welfare,
)


def bit(*items):
    m = 0
    for j in items:
        m |= 1 << j
    return m


class TestValuations:
    def test_additive_single_item(self):
        v = AdditiveValuation(values=(3.0, 1.0))
        assert value(v, bit(0)) == 3.0
        assert value(v, bit(0, 1)) == 4.0

    def test_null_is_zero_for_every_kind(self):
        vs = [
            AdditiveValuation((3.0, 1.0)),
            XosValuation(((3.0, 1.0), (1.0, 2.0))),
            MphValuation((((bit(0, 1), 4.0),),)),
            ThresholdValuation(5.0, 0.5),
            ScalarValuation(2.0),
            TableValuation(((1, 7.0),)),
        ]
        for v in vs:
            assert value(v, NULL) == 0.0

    def test_mph_containment(self):
        v = MphValuation((((bit(0, 1), 4.0),),))
        assert value(v, bit(0)) == 0.0
        assert value(v, bit(0, 1)) == 4.0

    def test_xos_max_over_clauses_matches_enumeration(self):
        clauses = ((3.0, 1.0), (1.0, 2.0))
        v = XosValuation(clauses)
        for mask in range(4):
            expected = max(
                sum(c[j] for j in range(2) if mask >> j & 1) for c in clauses
            )
            assert value(v, mask) == pytest.approx(expected)
        assert value(v, bit(0, 1)) == 4.0

    def test_mph_rank(self):
        v = MphValuation((((bit(0, 1), 4.0), (bit(2), 1.0)),))
        assert v.rank == 2

    def test_mph_rejects_negative_weight(self):
        with pytest.raises(ValueError):
            MphValuation((((bit(0), -1.0),),))

    def test_table_unknown_outcome(self):
        v = TableValuation(((1, 7.0),))
        with pytest.raises(KeyError):
            value(v, 2)

    def test_threshold(self):
        v = ThresholdValuation(5.0, 0.5)
        assert value(v, 0.5) == 5.0
        assert value(v, 0.375) == 0.0
        assert value(v, 0.625) == 5.0

    @given(st.integers(min_value=0, max_value=15))
    def test_mph_singletons_equal_xos(self, mask):
        # rank-1 hypergraph clauses coincide with the additive clause
        per_item = (1.5, 2.0, 0.25, 3.0)
        clause = tuple((bit(j), per_item[j]) for j in range(4))
        mph = MphValuation((clause,))
        xos = XosValuation((per_item,))
        assert value(mph, mask) == pytest.approx(value(xos, mask))


class TestFeasibility:
    def test_single_item(self):
        env = SingleItemEnv(n=2)
        assert not env.is_feasible((1, 1))
        assert env.is_feasible((1, 0))
        assert env.is_feasible((0, 0))

    def test_knapsack(self):
        env = KnapsackEnv(n=2)
        assert env.is_feasible((0.5, 0.5))
        assert not env.is_feasible((0.75, 0.5))

    def test_graphic_matroid_cycle(self):
        # edges 0=(0,1), 3=(1,2), 1=(0,2) form a triangle in K4
        m = Matroid.graphic_k4()
        env = MatroidEnv(n=3, matroid=m, elements=((0,), (3,), (1,)))
        assert not env.is_feasible((bit(0), bit(3), bit(1)))
        assert env.is_feasible((bit(0), bit(3), 0))

    def test_pip(self):
        env = PipEnv(n=2, matrix=((0.5, 0.5),), capacities=(1.0,))
        assert env.is_feasible((1, 1))
        env2 = PipEnv(n=3, matrix=((0.5, 0.5, 0.5),), capacities=(1.0,))
        assert not env2.is_feasible((1, 1, 1))

    def test_pip_rejects_large_coefficient(self):
        with pytest.raises(ValueError):
            PipEnv(n=1, matrix=((0.6,),), capacities=(1.0,))

    def test_explicit_requires_null(self):
        with pytest.raises(ValueError):
            ExplicitEnv(
                n=1, outcome_tokens=((1,),), feasible_set=frozenset({(1,)})
            )


class TestWelfare:
    def test_all_null(self):
        profile = (ScalarValuation(1.0), ScalarValuation(2.0))
        assert welfare(profile, (0, 0)) == 0.0

    def test_single_item_second_agent(self):
        profile = (ScalarValuation(1.0), ScalarValuation(2.0))
        assert welfare(profile, (0, 1)) == 2.0

    def test_ca_brute_force(self):
        env = CombinatorialAuctionEnv(n=2, items=2)
        profile = (AdditiveValuation((3.0, 1.0)), AdditiveValuation((1.0, 2.0)))
        best = max(welfare(profile, a) for a in enumerate_feasible(env))
        assert best == 5.0
        assert welfare(profile, (bit(0), bit(1))) == 5.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            welfare((ScalarValuation(1.0),), (0, 0))


class TestEnumeration:
    def test_single_item_counts(self):
        assert len(enumerate_feasible(SingleItemEnv(n=2))) == 3

    def test_two_uniform_on_three(self):
        m = Matroid.uniform(2, 3)
        env = MatroidEnv(n=3, matroid=m, elements=((0,), (1,), (2,)))
        assert len(enumerate_feasible(env)) == 7  # C(3,0)+C(3,1)+C(3,2)

    def test_ca_partitions(self):
        env = CombinatorialAuctionEnv(n=2, items=2)
        assert len(enumerate_feasible(env)) == 9

    def test_enumeration_deterministic_and_lexicographic(self):
        env = SingleItemEnv(n=2)
        allocs = enumerate_feasible(env)
        assert allocs == [(0, 0), (0, 1), (1, 0)]
        assert allocs == enumerate_feasible(env)

    def test_cap(self):
        env = CombinatorialAuctionEnv(n=3, items=4)
        with pytest.raises(CapExceeded):
            enumerate_feasible(env, cap=10)

    def test_knapsack_grid(self):
        env = KnapsackEnv(n=1, step=0.25)
        assert env.agent_outcomes(0) == (0.0, 0.25, 0.5, 0.75, 1.0)


class TestDownwardClosure:
    @pytest.mark.parametrize(
        "env",
        [
            SingleItemEnv(n=3),
            MatroidEnv(n=3, matroid=Matroid.uniform(2, 3), elements=((0,), (1,), (2,))),
            CombinatorialAuctionEnv(n=2, items=3),
            KnapsackEnv(n=2, step=0.25),
            PipEnv(n=3, matrix=((0.5, 0.25, 0.5), (0.25, 0.5, 0.0)), capacities=(1.0, 1.0)),
        ],
        ids=lambda e: e.kind,
    )
    def test_catalog_kinds_downward_closed(self, env):
        assert check_downward_closed(env)

    def test_restriction_helpers(self):
        alloc = (1, 0, 2)
        assert restrict(alloc, (0,)) == (1, 0, 0)
        assert prefix(alloc, 1) == (1, 0, 0)
        assert support(alloc) == (0, 2)


class TestProductEnv:
    def test_product_feasibility(self):
        env = ProductEnv(markets=(SingleItemEnv(n=2), SingleItemEnv(n=2)))
        assert env.n == 2
        assert env.is_feasible(((1, 0), (0, 1)))
        assert env.is_feasible(((1, 1), (0, 0)))
        assert not env.is_feasible(((1, 0), (1, 0)))
        # product null is collapsed to the scalar NULL token
        assert NULL in env.agent_outcomes(0)

    def test_product_enumeration_is_product_of_markets(self):
        env = ProductEnv(markets=(SingleItemEnv(n=2), SingleItemEnv(n=2)))
        assert len(enumerate_feasible(env)) == 9

    @given(st.integers(min_value=0, max_value=8))
    @settings(max_examples=20)
    def test_product_downward_closed(self, _):
        env = ProductEnv(markets=(SingleItemEnv(n=2), SingleItemEnv(n=2)))
        assert check_downward_closed(env)

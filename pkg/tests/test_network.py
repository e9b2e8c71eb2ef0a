import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rndcache import network
from rndcache.network import NetworkPlan
from rndcache.popularity import make_zipf
from rndcache.single import per_object_miss_asymptotic, prefactor_lru, prefactor_rnd

A17 = 1.7
RHO = prefactor_rnd(A17)
LAM = prefactor_lru(A17)


def eq_global(alpha, sizes, r):
    rho = prefactor_rnd(alpha)
    return rho * r**alpha / (rho * r**alpha + sum(c**alpha for c in sizes))


def test_plan_validation():
    with pytest.raises(ValueError):
        NetworkPlan((), 1.7)
    with pytest.raises(ValueError):
        NetworkPlan((("RND", 0),), 1.7)
    with pytest.raises(ValueError):
        NetworkPlan((("RND", 5), ("LRU", 5), ("RND", 5)), 1.7)
    with pytest.raises(ValueError):
        NetworkPlan((("RND", 5),), 1.0)
    assert NetworkPlan((("fifo", 5),), 2.0).policies == ("RND",)


def test_single_level_reduces_to_single_cache():
    plan = NetworkPlan.uniform("RND", [25], A17)
    for r in (1, 10, 100):
        est = per_object_miss_asymptotic("RND", A17, 25, r).value
        assert network.global_miss_per_object(plan, 1, r) == pytest.approx(est, rel=1e-14)
        assert network.local_miss_per_object(plan, 1, r) == pytest.approx(est, rel=1e-14)


def test_tandem_global_closed_form():
    plan = NetworkPlan.uniform("RND", [25, 40, 10], A17)
    r = np.arange(1, 200)
    for lv in (1, 2, 3):
        ref = eq_global(A17, [25, 40, 10][:lv], r)
        assert np.allclose(network.global_miss_per_object(plan, lv, r), ref, rtol=1e-13)


def test_tandem_local_closed_form():
    plan = NetworkPlan.uniform("RND", [25, 25], A17)
    r = 15.0
    ref = (RHO * r**A17 + 25**A17) / (RHO * r**A17 + 2 * 25**A17)
    assert network.local_miss_per_object(plan, 2, r) == pytest.approx(ref, rel=1e-14)
    g1 = network.global_miss_per_object(plan, 1, r)
    assert network.global_miss_per_object(plan, 2, r) == pytest.approx(
        1 / (1 / g1 + 25**A17 / (RHO * r**A17)), rel=1e-14)


def test_tandem_limits():
    plan = NetworkPlan.uniform("RND", [25, 25], A17)
    assert network.global_miss_per_object(plan, 2, 1e12) == pytest.approx(1.0, abs=1e-9)
    big = NetworkPlan.uniform("RND", [25, 10**9], A17)
    assert network.local_miss_per_object(big, 2, 10) < 1e-9


def test_mixed_plans_need_mixed_functions():
    plan = NetworkPlan((("RND", 25), ("LRU", 50)), A17)
    with pytest.raises(ValueError, match="mixed_tandem"):
        network.global_miss_per_object(plan, 2, 3)
    g, l = network.level_miss_per_object(plan, 2, 3)
    assert (g, l) == pytest.approx(network.mixed_tandem_rnd_then_lru(A17, 25, 50, 3))


def test_average_global_miss():
    one = NetworkPlan.uniform("RND", [30], A17)
    A = make_zipf(A17).normalizer
    assert network.average_global_miss(one, 1) == pytest.approx(A * RHO * 30 ** (1 - A17))
    two = NetworkPlan.uniform("RND", [30, 30], A17)
    assert network.average_global_miss(two, 2) == pytest.approx(
        network.average_global_miss(one, 1) / 2 ** (1 - 1 / A17), rel=1e-14)
    assert network.average_global_miss(NetworkPlan.uniform("RND", [1], 1.05), 1) == 1.0


def test_average_global_miss_sum_tracks_formula():
    d = make_zipf(A17, 20000)
    values = []
    for C in (20, 50, 100):
        plan = NetworkPlan.uniform("RND", [C, C], A17)
        s = network.average_global_miss_sum(plan, 2, d)
        values.append(s)
        assert s == pytest.approx(network.average_global_miss(plan, 2), rel=0.15)
    assert values[0] > values[1] > values[2]


def test_rnd_then_lru_formula():
    for r in (1, 7, 60):
        g, l = network.mixed_tandem_rnd_then_lru(A17, 25, 50, r)
        e = math.exp(-RHO * 50**A17 / (A17 * LAM * (RHO * r**A17 + 25**A17)))
        assert l == pytest.approx(e, rel=1e-13)
        assert g == pytest.approx(RHO * r**A17 / (RHO * r**A17 + 25**A17) * e, rel=1e-13)


def test_lru_then_rnd_formula():
    for r in (2, 7, 60):
        g, l = network.mixed_tandem_lru_then_rnd(A17, 25, 50, r)
        lead = math.exp(-25**A17 / (A17 * LAM * r**A17))
        ref = RHO * r**A17 / (RHO * r**A17 / lead + 50**A17)
        assert g == pytest.approx(ref, rel=1e-12)
        assert l == pytest.approx(ref / lead, rel=1e-12)


def test_mixed_degenerate_sizes():
    r = 12.0
    g, l = network.mixed_tandem_rnd_then_lru(A17, 25, 0, r)
    assert l == 1.0
    assert g == pytest.approx(per_object_miss_asymptotic("RND", A17, 25, r).value)
    g, l = network.mixed_tandem_lru_then_rnd(A17, 0, 50, r)
    assert g == pytest.approx(RHO * r**A17 / (RHO * r**A17 + 50**A17))
    g, l = network.mixed_tandem_rnd_then_lru(A17, 25, 50, 1e9)
    assert l == pytest.approx(1.0, abs=1e-9)
    g, l = network.mixed_tandem_lru_then_rnd(A17, 25, 50, 1e9)
    assert l == pytest.approx(RHO * 1e9**A17 / (RHO * 1e9**A17 + 50**A17), rel=1e-12)


def test_all_lru_first_level_and_tail():
    g, l = network.all_lru_tandem_per_object(A17, [25, 25], 1, 10)
    assert g == l == pytest.approx(math.exp(-25**A17 / (A17 * LAM * 10**A17)))
    g, _ = network.all_lru_tandem_per_object(A17, [25, 25], 2, 1e9)
    assert g == pytest.approx(1.0, abs=1e-9)


def test_rnd_keeps_popular_objects_deeper_than_lru():
    # an LRU leaf almost never forwards rank 1, so the second level sees little of it
    rnd = NetworkPlan.uniform("RND", [25, 25], A17)
    lru = NetworkPlan.uniform("LRU", [25, 25], A17)
    assert network.local_miss_per_object(rnd, 2, 1) < network.level_miss_per_object(lru, 2, 1)[1]


sizes_st = st.lists(st.integers(1, 500), min_size=1, max_size=5)
policies_st = st.sampled_from(["RND", "LRU"])


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(1.1, 4.0), sizes=sizes_st, policy=policies_st,
       r=st.floats(1.0, 1e4))
def test_telescoping_and_monotonicity(alpha, sizes, policy, r):
    plan = NetworkPlan.uniform(policy, sizes, alpha)
    prod = 1.0
    prev = 1.0
    for lv in range(1, plan.depth + 1):
        g, l = network.level_miss_per_object(plan, lv, r)
        prod *= l
        assert 0.0 <= l <= 1.0 and 0.0 <= g <= 1.0
        assert g == pytest.approx(prod, rel=1e-12, abs=1e-300)
        assert g <= prev + 1e-15
        prev = g
        g_next_rank = network.level_miss_per_object(plan, lv, r * 1.5)[0]
        assert g_next_rank >= g - 1e-15


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(1.1, 4.0), sizes=st.lists(st.integers(1, 500), min_size=2, max_size=5),
       r=st.floats(1.0, 1e3))
def test_rnd_level_recursion(alpha, sizes, r):
    plan = NetworkPlan.uniform("RND", sizes, alpha)
    rho = prefactor_rnd(alpha)
    for lv in range(1, plan.depth):
        lhs = 1 / network.global_miss_per_object(plan, lv + 1, r) - 1 / network.global_miss_per_object(plan, lv, r)
        assert lhs == pytest.approx(sizes[lv] ** alpha / (rho * r**alpha), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(1.1, 4.0), c1=st.integers(1, 300), c2=st.integers(1, 300),
       r=st.floats(1.0, 1e3))
def test_zero_size_level_is_transparent(alpha, c1, c2, r):
    locs, globs = network._cascade(["RND", "RND", "RND"], [c1, 0, c2], alpha, r)
    ref = eq_global(alpha, [c1, c2], r)
    assert globs[2] == pytest.approx(ref, rel=1e-12)
    assert locs[1] == 1.0

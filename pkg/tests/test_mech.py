import math

import numpy as np
import pytest
from scipy import integrate

from limprophet.dist import Empirical, Exponential, NotRegularError, PointMass, ProductDistribution, Uniform
from limprophet.env import DomainError, GraphicMatroid, UniformMatroid, offline_opt
from limprophet.harness import mechanism_case, paired_ratio
from limprophet.mech import (MechanismOutcome, ReservePolicy, accept_all, apply_reserves, build_copies,
                             comparison_mass_check, draw_reserves, myerson_benchmark, opm_revenue_run,
                             order_values, revenue_guarantee, spm_free_order, threshold_payment)
from limprophet.prophet import free_order_prophet, prophet_for

U = Uniform(0.0, 1.0)


def iid(m, n):
    return ProductDistribution.iid_of(m, n)


def test_threshold_payment():
    assert threshold_payment(True, 0.5) == 0.5
    assert threshold_payment(False, 0.5) == 0.0
    assert threshold_payment(True, 0.0) == 0.0
    assert threshold_payment(True, -math.inf) == 0.0


def test_policy_validation():
    with pytest.raises(DomainError):
        ReservePolicy("quantile", "lazy", 1.5)
    with pytest.raises(DomainError):
        ReservePolicy("posted")
    assert ReservePolicy.from_dict({"kind": "single-sample", "application": "eager"}).application == "eager"
    assert ReservePolicy.from_dict(None) == ReservePolicy()


def test_lazy_reserve_example(rng):
    out = apply_reserves(accept_all(2), [0.9, 0.4], ReservePolicy("quantile", "lazy", 0.5), iid(U, 2), rng)
    assert out.winners == (0,)
    assert out.payments[0] >= 0.5 and out.check_ir([0.9, 0.4])


def test_zero_reserves_change_nothing(rng):
    vals = [0.9, 0.4, 0.1]
    base = apply_reserves(accept_all(3), vals, ReservePolicy(), iid(U, 3), rng)
    for app in ("lazy", "eager"):
        out = apply_reserves(accept_all(3), vals, ReservePolicy("quantile", app, 0.0), iid(U, 3), rng)
        assert (out.winners, out.payments) == (base.winners, base.payments)


def test_monopoly_needs_regular(rng):
    with pytest.raises(NotRegularError):
        draw_reserves(ReservePolicy("monopoly"), ProductDistribution((Empirical((1.0, 2.0), (0.5, 0.5)),)), rng)
    assert draw_reserves(ReservePolicy("monopoly"), iid(U, 2), rng).tolist() == [0.5, 0.5]


def test_sample_reserve_alone_earns_one_sixth(rng):
    pol = ReservePolicy("single-sample", "lazy")
    dist = iid(U, 1)
    rev = [apply_reserves(accept_all(1), [rng.random()], pol, dist, rng).revenue for _ in range(100_000)]
    assert abs(np.mean(rev) - integrate.quad(lambda s: s * (1 - s), 0, 1)[0]) < 0.01


def test_sample_reserves_prefer_unread_samples(rng):
    samples = np.array([[0.1, 0.2], [0.7, 0.8]])
    consumed = np.array([[True, False], [False, False]])
    r = draw_reserves(ReservePolicy("single-sample"), iid(U, 2), rng, samples, consumed)
    assert r.tolist() == [0.7, 0.2]


def test_myerson_single_bidder(rng):
    mean, se = myerson_benchmark(UniformMatroid(1, 1), iid(U, 1), 100_000, rng)
    assert abs(mean - 0.25) < 0.005


def test_myerson_two_bidders(rng):
    # second price with reserve 1/2: E[max(2 max(v) - 1, 0)], max of two uniforms has density 2x
    oracle = integrate.quad(lambda x: (2 * x - 1) * 2 * x, 0.5, 1)[0]
    assert oracle == pytest.approx(5 / 12)
    mean, _ = myerson_benchmark(UniformMatroid(2, 1), iid(U, 2), 40_000, rng)
    assert abs(mean - oracle) < 0.01


def test_myerson_point_masses(rng):
    dist = ProductDistribution((PointMass(2.0), PointMass(3.0), PointMass(1.0)))
    mean, se = myerson_benchmark(UniformMatroid(3, 2), dist, 50, rng)
    assert mean == 5.0 and se == 0.0
    with pytest.raises(NotRegularError):
        myerson_benchmark(UniformMatroid(1, 1), ProductDistribution((Empirical((1.0,), (1.0,)),)), 10, rng)


def test_revenue_guarantee_metadata():
    assert revenue_guarantee(0.5, iid(U, 3)) == 0.25
    assert revenue_guarantee(0.5, ProductDistribution((Exponential(1.0), Exponential(2.0)))) == 0.5 / (2 * math.e)


def test_copies_structure():
    c = build_copies(2, 3, [[U] * 3, [U] * 3])
    assert len(c.agents) == 6 and c.env.n == 6
    one = build_copies(1, 4, [[U] * 4])
    for i in range(4):
        assert one.env.is_feasible([i])
        for j in range(i + 1, 4):
            assert not one.env.is_feasible([i, j])
    # 2-sparse: every buyer likes two items, every item two buyers
    table = [[U if (j - i) % 4 in (0, 1) else None for j in range(4)] for i in range(4)]
    sparse = build_copies(4, 4, table)
    assert sparse.env.graph.d == 2 and sparse.env.n == 8
    with pytest.raises(DomainError):
        build_copies(2, 2, [[U, U]])


def test_copies_with_item_constraint():
    items = GraphicMatroid(3, ((0, 1), (1, 2), (0, 2)))
    c = build_copies(3, 3, [[U] * 3] * 3, source=items)
    a = c.agent_of
    assert c.env.is_feasible([a(0, 0), a(1, 1)])
    assert not c.env.is_feasible([a(0, 0), a(1, 1), a(2, 2)])      # items form a cycle
    assert not c.env.is_feasible([a(0, 0), a(0, 1)])                # unit demand
    assert not c.env.is_feasible([a(0, 0), a(1, 0)])                # one unit per item


def test_opm_single_copy_payment(rng):
    c = build_copies(1, 1, [[U]])
    pol = ReservePolicy("quantile", "lazy", 0.2)
    sold = 0
    for _ in range(200):
        out = opm_revenue_run(c, "matching", pol, "random", rng, values=np.array([0.9]))
        if out.winners:
            sold += 1
            assert out.payments[0] == max(out.run.prices[0], 0.2)
    assert sold > 0
    with pytest.raises(DomainError):
        opm_revenue_run(build_copies(2, 2, [[U, U], [U, U]]), "matching", pol, "random", rng, samples=np.zeros((1, 4)))


def test_opm_orders_contract(rng):
    c = build_copies(3, 3, [[Exponential(1.0)] * 3] * 3)
    for strat in ("decreasing", "increasing"):
        for _ in range(100):
            v = c.dist.sample(rng)
            out = opm_revenue_run(c, "matching", ReservePolicy("single-sample"), strat, rng, values=v)
            assert c.env.is_feasible(out.winners) and out.check_ir(v)
            assert out.revenue >= 0


def test_order_values():
    assert order_values([0.3, 0.1, 0.2], "increasing") == [1, 2, 0]
    assert order_values([0.3, 0.1, 0.2], "decreasing") == [0, 2, 1]
    with pytest.raises(DomainError):
        order_values([0.3, 0.1], [0, 0])


def test_spm_examples(rng):
    env = UniformMatroid(3, 1)
    vals = np.array([0.2, 0.9, 0.5])
    for _ in range(100):
        out = spm_free_order(env, iid(U, 3), ReservePolicy(), rng, values=vals)
        assert env.is_feasible(out.winners)
    # no reserves: identical to the bare free-order run with the same stream
    seed = 99
    sample = np.array([0.4, 0.3, 0.6])
    out = spm_free_order(env, iid(U, 3), ReservePolicy(), np.random.default_rng(seed), values=vals, sample=sample)
    alg_seed = np.random.default_rng(seed).integers(0, 2**63, 2)[0]
    bare = free_order_prophet(env, sample, vals, np.random.default_rng(alg_seed))
    assert out.welfare == bare.welfare(vals)
    with pytest.raises(DomainError):
        from limprophet.env import BipartiteMatching, BipartiteGraph
        spm_free_order(BipartiteMatching(BipartiteGraph.from_pairs(1, 1, [(0, 0)])), iid(U, 1), ReservePolicy(), rng)


def test_spm_graphic_welfare_ratio(rng):
    env = GraphicMatroid(3, ((0, 1), (1, 2), (0, 2)))
    dist = iid(U, 3)
    alg, opt = [], []
    for _ in range(10_000):
        v = dist.sample(rng)
        alg.append(spm_free_order(env, dist, ReservePolicy(), rng, values=v).welfare)
        opt.append(offline_opt(env, v)[1])
    pr = paired_ratio(alg, opt)
    assert pr.ratio >= 0.25 - 2 * pr.stderr


def test_comparison_mass_rehearsal_and_rank1(rng):
    env = UniformMatroid(8, 3)
    cm = comparison_mass_check("uniform-k", env, list(range(8))[::-1], 500, rng)
    assert cm.invariant
    assert cm.J.tolist() == [min(i, 3) for i in range(1, 9)]
    r1 = comparison_mass_check("rank1", UniformMatroid(5, 1), range(5), 4000, rng)
    assert r1.invariant
    assert r1.prefix[0] >= 0.25 - 3 * r1.stderr[0]
    with pytest.raises(DomainError):
        from limprophet.env import BipartiteMatching, BipartiteGraph
        comparison_mass_check("matching", BipartiteMatching(BipartiteGraph.from_pairs(1, 2, [(0, 0), (0, 1)])),
                              range(2), 10, rng)


@pytest.mark.parametrize("kind", ["partition", "graphic", "transversal"])
def test_comparison_based_algorithms_are_embedding_invariant(kind, rng):
    from limprophet.harness import random_pairing
    env = random_pairing(kind, rng)
    assert comparison_mass_check(kind, env, rng.permutation(env.n), 300, rng).invariant


def test_mechanism_invariants(rng):
    for _ in range(500):
        res = mechanism_case(rng)
        assert all(v for k, v in res.items() if k != "kind"), res

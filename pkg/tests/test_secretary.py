import itertools
import json
import math
from pathlib import Path

import numpy as np
import pytest

from limprophet.env import (DomainError, GraphicMatroid, PartitionMatroid, TransversalMatroid, UniformMatroid,
                            offline_opt, random_graphic, random_laminar, random_transversal)
from limprophet.harness import free_order_exact, random_matroid
from limprophet.secretary import (BlockwiseRank1, GraphicKP, GVRandomAssignment, Rank1Secretary, TransversalDP,
                                  blockwise_rank1, free_order_jsz, free_order_run, graphic_blocks, graphic_kp,
                                  gv_random_assignment, laminar_blocks, make_secretary, rank1_secretary,
                                  run_secretary, span_cost, transversal_dp)

FIX = Path(__file__).parent / "fixtures"
TRIANGLE = GraphicMatroid(3, ((0, 1), (1, 2), (0, 2)))


def test_rank1_examples():
    assert rank1_secretary([5], [(0, 3), (1, 7), (2, 2)]) == 1
    assert rank1_secretary([5], [(0, 3), (1, 4)]) is None
    assert rank1_secretary([], [(0, 6), (1, 9)]) == 0


def test_blockwise_examples():
    blocks = [(0, 1), (2, 3)]
    got = blockwise_rank1(blocks, [(0, 5), (2, 2)], [(1, 7), (3, 1)])
    assert got == (1,)
    stream = [(1, 3.0), (2, 7.0), (3, 9.0)]
    assert blockwise_rank1([range(4)], [(0, 5.0)], stream) == (rank1_secretary([5.0], stream),)
    with pytest.raises(DomainError):
        BlockwiseRank1([(0, 1), (1, 2)])


def test_blockwise_equals_independent_runs(rng):
    blocks = [(0, 3), (1, 4, 5), (2,)]
    vals = rng.random(6)
    for mask in range(1 << 6):
        sample = [(i, vals[i]) for i in range(6) if (mask >> i) & 1]
        for order in itertools.islice(itertools.permutations(range(6)), 0, 720, 37):
            online = [(i, vals[i]) for i in order if not (mask >> i) & 1]
            got = set(blockwise_rank1(blocks, sample, online))
            direct = set()
            for b in blocks:
                acc = rank1_secretary([v for i, v in sample if i in b], [(i, v) for i, v in online if i in b])
                if acc is not None:
                    direct.add(acc)
            assert got == direct


def test_graphic_orientation_blocks():
    blocks = graphic_blocks(TRIANGLE, 0)
    assert blocks == [[0, 2], [1], []]
    assert graphic_blocks(TRIANGLE, 1) == [[], [0], [1, 2]]


def test_graphic_kp_hand_trace():
    fx = json.loads((FIX / "graphic_kp_trace.json").read_text())
    env = GraphicMatroid(fx["vertices"], tuple(map(tuple, fx["edges"])))
    for coin, expect in fx["accepted"].items():
        got = graphic_kp(env, [tuple(p) for p in fx["sample_phase"]], [tuple(p) for p in fx["online"]], coin=int(coin))
        assert list(got) == expect


def test_graphic_kp_outputs_forests(rng):
    for _ in range(1000):
        env = random_graphic(int(rng.integers(2, 7)), int(rng.integers(1, 12)), rng, loops=True)
        vals = rng.random(env.n)
        acc = run_secretary(GraphicKP(env, rng), vals, rng)
        assert env.is_feasible(acc)


def test_transversal_examples():
    env = TransversalMatroid(3, 2, ((0, 1), (0, 1), (1,)))
    for rule in ("threshold", "literal"):
        alg = TransversalDP(env, rule=rule)
        alg.observe([(0, 5.0)])
        assert alg.m0 == {0: 0}
        assert alg.offer(1, 3.0)
        assert alg.matching == {1: 1}
        assert not alg.offer(2, 10.0)


def test_transversal_rules_differ_above_the_sample():
    env = TransversalMatroid(2, 2, ((0, 1), (0, 1)))
    assert transversal_dp(env, [(0, 5.0)], [(1, 9.0)], rule="threshold") == (1,)
    thr = TransversalDP(env)
    thr.observe([(0, 5.0)])
    thr.offer(1, 9.0)
    lit = TransversalDP(env, rule="literal")
    lit.observe([(0, 5.0)])
    lit.offer(1, 9.0)
    assert thr.matching == {0: 1} and lit.matching == {1: 1}


def test_transversal_ranking_and_order_switches():
    env = TransversalMatroid(3, 2, ((0, 1), (0, 1), (0, 1)))
    alg = TransversalDP(env, ranking=[1, 0], sample_order="arrival")
    alg.observe([(0, 1.0), (1, 4.0)])
    assert alg.m0 == {1: 0, 0: 1}
    with pytest.raises(DomainError):
        TransversalDP(env, rule="other")


def test_transversal_output_feasible(rng):
    for _ in range(300):
        env = random_transversal(8, 4, 3, rng)
        for rule in ("threshold", "literal"):
            acc = run_secretary(TransversalDP(env, rule=rule), rng.random(8), rng)
            assert env.is_feasible(acc)


def test_gv_examples():
    env = UniformMatroid(32, 16)
    alg = GVRandomAssignment(env)
    alg.observe([(i, float(16 - i)) for i in range(16)])
    assert alg.threshold == 12.0
    assert alg.offer(20, 13.0)
    small = GVRandomAssignment(UniformMatroid(8, 4))
    assert small.delegate is not None
    assert gv_random_assignment(UniformMatroid(8, 4), [(0, 5.0)], [(1, 6.0), (2, 7.0)]) == (1,)


def test_rank1_and_gv_follow_their_rules_for_every_order(rng):
    n = 6
    vals = rng.random(n)
    env = UniformMatroid(n, n)
    for mask in range(1 << n):
        S = [i for i in range(n) if (mask >> i) & 1]
        T = max((vals[i] for i in S), default=-math.inf)
        for order in itertools.permutations([i for i in range(n) if i not in S]):
            acc = run_secretary(Rank1Secretary(), vals, None, online_order=order, sample_set=S)
            first = next((i for i in order if vals[i] > T), None)
            assert acc == ([] if first is None else [first])
    # gv with rank >= 12: greedy-by-arrival among values above T
    env = UniformMatroid(24, 12)
    vals = rng.random(24)
    S = list(range(12))
    T = sorted(vals[S], reverse=True)[3]
    for _ in range(200):
        order = list(rng.permutation(24))
        acc = run_secretary(GVRandomAssignment(env), vals, None, online_order=order, sample_set=S)
        assert acc == [i for i in order if i not in S and vals[i] > T][:12]


def test_span_cost_examples():
    assert span_cost(UniformMatroid(3, 1), 2, [0, 1], [8, 6, 1]) == 8
    assert span_cost(UniformMatroid(3, 1), 2, [], [8, 6, 1]) == 0
    assert span_cost(TRIANGLE, 2, [0, 1], [5, 4, 3]) == 4


def test_free_order_examples():
    res = free_order_run(UniformMatroid(3, 1), [0], [8, 9, 7], [8, 9, 7])
    assert res.accepted == [1]
    res = free_order_run(TRIANGLE, [], [5, 4, 3], [5, 4, 3])
    assert res.accepted == [0, 1]


def test_free_order_triangle_fixture():
    fx = json.loads((FIX / "free_order_triangle.json").read_text())
    env = GraphicMatroid(3, tuple(map(tuple, fx["edges"])))
    w = fx["weights"]
    for mask, expect in fx["accepted_by_sample_mask"].items():
        S = [i for i in range(3) if (int(mask) >> i) & 1]
        assert sorted(free_order_run(env, S, w, w).accepted) == expect


def test_free_order_exact_guarantees(rng):
    for _ in range(15):
        env = random_matroid(rng, 8)
        probs, guarantee = free_order_exact(env, rng.random(env.n))
        assert guarantee
        assert min(probs.values()) >= 0.25


def test_free_order_jsz_feasible(rng):
    for _ in range(500):
        env = random_matroid(rng, 8)
        assert env.is_feasible(free_order_jsz(env, rng.random(env.n), rng))


def test_laminar_blocks_one_per_block_is_feasible(rng):
    for _ in range(200):
        env = random_laminar(9, rng)
        blocks = laminar_blocks(env)
        flat = [e for b in blocks for e in b]
        assert len(flat) == len(set(flat))
        for pick in itertools.islice(itertools.product(*blocks), 200):
            assert env.is_feasible(pick)


def order_oblivious_means(alg_factory, env, vals, rng, orders=20, trials=1000):
    out = []
    for _ in range(orders):
        order = list(rng.permutation(env.n))
        w = [sum(vals[i] for i in run_secretary(alg_factory(), vals, rng, online_order=order))
             for _ in range(trials)]
        out.append((np.mean(w), np.std(w, ddof=1) / math.sqrt(trials)))
    return out


@pytest.mark.parametrize("name,alpha", [("rank1", 0.25), ("blockwise", 0.25), ("graphic-kp", 1 / 8),
                                        ("transversal-dp", 1 / 16)])
def test_order_obliviousness(name, alpha, rng):
    """Across 20 adversarial online orders the guarantee holds for every order."""
    if name == "rank1":
        env = UniformMatroid(8, 1)
    elif name == "blockwise":
        env = PartitionMatroid(8, ((0, 1, 2), (3, 4), (5, 6, 7)), (1, 1, 1))
    elif name == "graphic-kp":
        env = random_graphic(5, 8, rng)
    else:
        env = random_transversal(8, 4, 2, rng)
    vals = rng.random(env.n) ** 3
    opt = offline_opt(env, vals)[1]
    for mean, se in order_oblivious_means(lambda: make_secretary(name, env, rng), env, vals, rng):
        assert mean >= alpha * opt - 3 * se

import itertools
import json

import numpy as np
import pytest

from limprophet.env import (BipartiteGraph, BipartiteMatching, DomainError, Edge, GraphicMatroid, LaminarMatroid,
                            PartitionMatroid, TransversalMatroid, UniformMatroid, UnsupportedOperationError,
                            edge_index, edge_threshold, env_from_json, env_to_json, greedy_basis, is_feasible,
                            offline_opt, opt_value, random_bipartite, random_graphic, random_laminar,
                            random_partition, random_transversal, rank_and_span)
from limprophet.harness import random_matroid

TRIANGLE = GraphicMatroid(3, ((0, 1), (1, 2), (0, 2)))


def brute_opt(env, w):
    best, best_set = 0.0, ()
    for r in range(env.n + 1):
        for sub in itertools.combinations(range(env.n), r):
            if env.is_feasible(sub):
                val = sum(w[i] for i in sub)
                if val > best + 1e-12:
                    best, best_set = val, sub
    return best_set, best


def brute_rank(env, members):
    members = list(members)
    for r in range(len(members), -1, -1):
        if any(env.is_feasible(s) for s in itertools.combinations(members, r)):
            return r


def k22():
    # edges e11, e12, e21, e22
    return BipartiteGraph.from_pairs(2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)])


def test_feasibility_examples():
    assert not is_feasible(UniformMatroid(3, 2), {0, 1, 2})
    for pair in itertools.combinations(range(3), 2):
        assert is_feasible(TRIANGLE, pair)
    assert not is_feasible(TRIANGLE, (0, 1, 2))
    trans = TransversalMatroid(2, 1, ((0,), (0,)))
    assert not is_feasible(trans, (0, 1))
    assert is_feasible(trans, ())


def test_index_out_of_range():
    with pytest.raises(DomainError):
        is_feasible(UniformMatroid(3, 2), (0, 3))


def test_rank_and_span_examples():
    assert rank_and_span(TRIANGLE, (0, 1), 2) == (2, True)
    assert rank_and_span(UniformMatroid(2, 1), (0,), 1) == (1, True)
    assert rank_and_span(UniformMatroid(3, 2), (0,), 1) == (1, False)
    with pytest.raises(UnsupportedOperationError):
        rank_and_span(BipartiteMatching(k22()), (0,), 1)


def test_laminar_rank_matches_brute_force(rng):
    for _ in range(30):
        env = random_laminar(8, rng)
        sub = [i for i in range(8) if rng.random() < 0.7]
        assert rank_and_span(env, sub, 0)[0] == brute_rank(env, sub)


def test_parallel_edges_form_a_cycle():
    g = GraphicMatroid(2, ((0, 1), (0, 1)))
    assert not g.is_feasible((0, 1))
    assert not GraphicMatroid(2, ((1, 1),)).is_feasible((0,))


def test_offline_opt_examples():
    assert offline_opt(TRIANGLE, [5, 4, 3]) == ((0, 1), 9.0)
    assert offline_opt(UniformMatroid(3, 1), [3, 1, 2]) == ((0,), 3.0)
    # (v11, v12, v21, v22) = (2, 3, 2, 4): {e11, e22} = 6 beats {e12, e21} = 5
    assert offline_opt(BipartiteMatching(k22()), [2, 3, 2, 4]) == ((0, 3), 6.0)


def test_offline_opt_tie_rule():
    assert offline_opt(UniformMatroid(3, 1), [2, 2, 2]) == ((0,), 2.0)
    # two maximum matchings of weight 2; lexicographically smallest wins
    assert offline_opt(BipartiteMatching(k22()), [1, 1, 1, 1])[0] == (0, 3)


def test_edge_index_examples():
    g = BipartiteGraph(2, 2, (Edge(0, 1, 0, 1),), 2)
    assert edge_index(g, 0) == 3
    g = BipartiteGraph(1, 1, (Edge(0, 0, 0, 0),), 2)
    assert edge_index(g, 0) == 1
    g = BipartiteGraph(1, 1, (Edge(0, 0, 2, 2),), 3)
    assert edge_index(g, 0) == 9


def test_edge_threshold_examples():
    g = BipartiteGraph.from_pairs(1, 2, [(0, 0), (0, 1)])
    assert edge_threshold(g, 0, [0.0, 5.0]) == 5.0
    g = BipartiteGraph.from_pairs(2, 2, [(0, 0), (1, 1)])
    assert edge_threshold(g, 0, [0.0, 7.0]) == 0.0
    assert edge_threshold(k22(), 0, [0.0, 3.0, 2.0, 4.0]) == 1.0


def test_graph_validation():
    with pytest.raises(DomainError):
        BipartiteGraph(1, 2, (Edge(0, 0, 0, 0), Edge(0, 1, 0, 0)), 2)
    with pytest.raises(DomainError):
        BipartiteGraph(1, 1, (Edge(0, 0, 2, 0),), 2)


def test_structure_validation():
    with pytest.raises(DomainError):
        PartitionMatroid(3, ((0, 1), (1, 2)), (1, 1))
    with pytest.raises(DomainError):
        PartitionMatroid(3, ((0,), (1,)), (1, 1))
    with pytest.raises(DomainError):
        LaminarMatroid(4, ((0, 1), (1, 2)), (1, 1))


def test_greedy_equals_exhaustive(rng):
    for _ in range(150):
        env = random_matroid(rng, 10)
        w = rng.random(env.n)
        chosen, val = offline_opt(env, w)
        _, best = brute_opt(env, w)
        assert env.is_feasible(chosen)
        assert val == pytest.approx(best, rel=1e-9)
        assert opt_value(env, w) == pytest.approx(best, rel=1e-9)


def test_matching_solver_equals_exhaustive(rng):
    for _ in range(150):
        g = random_bipartite(3, 4, 3, int(rng.integers(1, 9)), rng)
        env = BipartiteMatching(g)
        w = rng.random(env.n) * (rng.random(env.n) < 0.8)
        chosen, val = offline_opt(env, w)
        best_set, best = brute_opt(env, w)
        assert env.is_feasible(chosen)
        assert val == pytest.approx(best, rel=1e-9)


def _in_max_matching(g, e, w):
    chosen, _ = offline_opt(BipartiteMatching(g), w)
    return e in chosen


def test_edge_threshold_is_the_entry_point(rng):
    for _ in range(100):
        g = random_bipartite(3, 3, 3, int(rng.integers(1, 9)), rng)
        w = rng.random(g.n_edges)
        for e in range(g.n_edges):
            t = edge_threshold(g, e, w)
            eps = 1e-9 * (1 + t)
            hi = w.copy()
            hi[e] = t + eps
            assert _in_max_matching(g, e, hi)
            if t - eps > 0:
                lo = w.copy()
                lo[e] = t - eps
                assert not _in_max_matching(g, e, lo)


def test_incident_edges_have_distinct_indices(rng):
    for _ in range(200):
        g = random_bipartite(4, 4, int(rng.integers(1, 4)), 12, rng)
        for e in range(g.n_edges):
            assert 1 <= edge_index(g, e) <= g.d ** 2
            for f in g.conflicts(e):
                assert edge_index(g, e) != edge_index(g, f)


def test_downward_closure(rng):
    for _ in range(10_000):
        env = random_matroid(rng, 8) if rng.random() < 0.8 else BipartiteMatching(random_bipartite(3, 3, 2, 6, rng))
        basis = offline_opt(env, rng.random(env.n))[0]
        sub = [e for e in basis if rng.random() < 0.5]
        assert env.is_feasible(sub)


def test_augmentation_on_six_elements(rng):
    for _ in range(25):
        env = random_matroid(rng, 6)
        fam = [s for r in range(env.n + 1) for s in itertools.combinations(range(env.n), r) if env.is_feasible(s)]
        for a in fam:
            for b in fam:
                if len(b) > len(a):
                    assert any(env.is_feasible(tuple(sorted(a + (x,)))) for x in b if x not in a)


def test_json_round_trip(rng):
    envs = [UniformMatroid(4, 2), random_partition(7, 3, rng), random_laminar(9, rng), random_graphic(4, 6, rng),
            random_transversal(5, 3, 2, rng), BipartiteMatching(random_bipartite(3, 3, 2, 5, rng))]
    for env in envs:
        text = env_to_json(env)
        back = env_from_json(text)
        assert back == env
        assert env_to_json(back) == text


def test_json_schema_fields():
    d = json.loads(env_to_json(BipartiteMatching(k22())))
    assert set(d) == {"kind", "n", "left", "right", "d", "edges"}
    assert set(d["edges"][0]) == {"left", "right", "leftOrdinal", "rightOrdinal"}
    with pytest.raises(DomainError):
        env_from_json('{"kind": "nope", "n": 1}')
    with pytest.raises(DomainError):
        env_from_json('{"kind": "graphic", "n": 5, "vertices": 2, "edges": [[0, 1]]}')


def test_greedy_skips_zero_weights():
    assert greedy_basis(UniformMatroid(3, 3), [0.0, 1.0, 0.0]) == [1]

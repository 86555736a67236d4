"""Sample-based prophet algorithms.

* ``reduce_secretary_to_prophet``: turn an order-oblivious secretary
  algorithm into a single-sample prophet algorithm by feeding a random subset
  of the sample profile as its sample phase.
* ``rehearsal_run``: k-slot threshold rule for k-uniform matroids.
* ``p_matching``: edge prices from d^2 sample profiles plus a 1/3 coin.

All runs return a ``ProphetRun`` carrying the posted price each element saw
on arrival, which is what the mechanism layer charges.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .env import (BipartiteGraph, BipartiteMatching, DomainError, Environment, GraphicMatroid,
                  LaminarMatroid, PartitionMatroid, TransversalMatroid, UniformMatroid, edge_index,
                  edge_threshold)
from .secretary import (BlockwiseRank1, GraphicKP, GVRandomAssignment, OrderOblivious, Rank1Secretary, TransversalDP,
                        free_order_run, laminar_blocks)

INF = math.inf


@dataclass
class ProphetRun:
    n: int
    accepted: list[int] = field(default_factory=list)      # acceptance order
    prices: np.ndarray = None                               # price posted to each element on arrival
    consumed: np.ndarray = None                             # (profiles, n) mask of sample coordinates read
    trace: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.prices is None:
            self.prices = np.full(self.n, INF)
        if self.consumed is None:
            self.consumed = np.zeros((1, self.n), dtype=bool)

    @property
    def accepted_set(self) -> tuple[int, ...]:
        return tuple(sorted(self.accepted))

    def welfare(self, values) -> float:
        return float(sum(values[i] for i in self.accepted))

    def _log(self, index, value, price, decision, coin=None):
        self.trace.append({"index": int(index), "value": float(value),
                           "price": None if math.isinf(price) else float(price),
                           "coin": coin, "decision": decision})


def dump_trace(run: ProphetRun, fh) -> None:
    """One JSON object per decision."""
    for rec in run.trace:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_trace(lines: Iterable[str]) -> list[dict]:
    return [json.loads(l) for l in lines if l.strip()]


# ---------------------------------------------------------------------------
# secretary -> prophet


def reduce_secretary_to_prophet(alg: OrderOblivious, s, online: Iterable[tuple[int, float]],
                                rng: np.random.Generator | None = None, k: int | None = None,
                                perm: Sequence[int] | None = None, active=None) -> ProphetRun:
    """Run ``alg`` with a random prefix of the sample profile as its sample phase.

    ``k`` and ``perm`` may be forced; otherwise ``k`` comes from the
    algorithm and ``perm`` is a uniform permutation.  Online elements whose
    index was used in the sample phase are skipped.  Elements with
    ``active[i]`` false are shown no offer (eager reserve filtering).
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if k is None:
        k = alg.sample_phase_size(n, rng)
    if perm is None:
        perm = rng.permutation(n)
    if not 0 <= k <= n:
        raise DomainError(f"sample phase size {k} outside 0..{n}")
    phase = [int(j) for j in perm[:k]]
    run = ProphetRun(n)
    run.consumed[0, phase] = True
    run.extra["sample_phase"] = phase
    alg.observe([(j, s[j]) for j in phase])
    ignored = set(phase)
    for i, v in online:
        if i in ignored:
            run._log(i, v, INF, "ignored")
            continue
        price = alg.price(i)
        run.prices[i] = price
        if active is not None and not active[i]:
            run._log(i, v, price, "inactive")
            continue
        ok = alg.offer(i, v)
        if ok:
            run.accepted.append(i)
        run._log(i, v, price, "accept" if ok else "reject")
    return run


# ---------------------------------------------------------------------------
# rehearsal


def rehearsal_thresholds(s, k: int) -> np.ndarray:
    """k non-increasing thresholds: the top q samples, then the q-th repeated."""
    s = np.asarray(s, dtype=float)
    if k < 1:
        raise DomainError("k must be at least 1")
    if k > s.shape[0]:
        raise DomainError(f"k={k} exceeds the number of samples {s.shape[0]}")
    q = int(_kernels.jump_sample_index(k))
    top = -np.sort(-s)[:q]
    return np.concatenate([top, np.full(k - q, top[q - 1])])


def rehearsal_run(thresholds, online, active=None) -> ProphetRun:
    """Slot rule: an arrival fills the lowest-index free slot with threshold strictly below it.

    ``online`` is a list of (index, value) pairs or a plain value array
    (indices then follow array position).  ``extra["slots"]`` maps accepted
    index to its 0-based slot.
    """
    thr = np.ascontiguousarray(thresholds, dtype=float)
    if np.any(np.diff(thr) > 0):
        raise DomainError("thresholds must be non-increasing")
    if isinstance(online, np.ndarray):
        idx = np.arange(online.shape[0])
        vals = online.astype(float)
    else:
        pairs = list(online)
        idx = np.array([i for i, _ in pairs], dtype=np.int64)
        vals = np.array([v for _, v in pairs], dtype=float)
    n = int(idx.max()) + 1 if idx.size else 0
    keep = np.ones(idx.shape[0], dtype=bool) if active is None else np.asarray(active, dtype=bool)[idx]
    slots = np.full(idx.shape[0], -1, dtype=np.int64)
    prices = np.full(idx.shape[0], INF)
    sub_slots = np.empty(int(keep.sum()), dtype=np.int64)
    sub_prices = np.empty(int(keep.sum()))
    _kernels.rehearsal_fill(thr, vals[keep], sub_slots, sub_prices)
    slots[keep] = sub_slots
    prices[keep] = sub_prices
    run = ProphetRun(n)
    run.extra["slots"] = {}
    for t in range(idx.shape[0]):
        i = int(idx[t])
        run.prices[i] = prices[t]
        if not keep[t]:
            run._log(i, vals[t], prices[t], "inactive")
            continue
        if slots[t] >= 0:
            run.accepted.append(i)
            run.extra["slots"][i] = int(slots[t])
        run._log(i, vals[t], prices[t], "accept" if slots[t] >= 0 else "reject")
    run.extra["thresholds"] = thr
    return run


# ---------------------------------------------------------------------------
# matchings


def greedy_edge_threshold(graph: BipartiteGraph, e: int, others) -> float:
    """Smallest weight putting ``e`` into the greedy (heaviest-first) matching.

    Greedy on the other edges covers ``e``'s endpoints with some picked
    edges; ``e`` enters iff it outweighs every such edge.  The result is
    always one of the other weights (or 0), so the rule is comparison-based.
    """
    w = np.asarray(others, dtype=float)
    ed = graph.edges[e]
    used_l, used_r = set(), set()
    best = 0.0
    for f in sorted((f for f in range(graph.n_edges) if f != e and w[f] > 0), key=lambda f: (-w[f], f)):
        fe = graph.edges[f]
        if fe.left in used_l or fe.right in used_r:
            continue
        used_l.add(fe.left)
        used_r.add(fe.right)
        if fe.left == ed.left or fe.right == ed.right:
            best = max(best, w[f])
    return best


def matching_prices(graph: BipartiteGraph, samples, per_edge=False, rule="threshold"):
    """Price per edge and the sample profile it was read from."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    budget = graph.n_edges if per_edge else graph.d ** 2
    if samples.shape[0] < budget:
        raise DomainError(f"need {budget} sample profiles, got {samples.shape[0]}")
    price_fn = {"threshold": edge_threshold, "greedy": greedy_edge_threshold}[rule]
    src = np.array([e if per_edge else edge_index(graph, e) - 1 for e in range(graph.n_edges)], dtype=np.int64)
    prices = np.array([price_fn(graph, e, samples[src[e]]) for e in range(graph.n_edges)])
    return prices, src


def p_matching(graph: BipartiteGraph, samples, online: Iterable[tuple[int, float]],
               rng: np.random.Generator | None = None, coin_prob: float = 1 / 3, coins=None,
               per_edge: bool = False, rule: str = "threshold", active=None) -> ProphetRun:
    """Degree-bounded matching algorithm.

    Edge ``e`` is priced from sample profile ``Index(e)`` (or its own profile
    when ``per_edge``); on arrival it is kept only if its coin is 1, and then
    accepted iff its value beats the price and the matching stays valid.
    Coins are drawn for all edges up front so they never depend on values.
    """
    m = graph.n_edges
    prices, src = matching_prices(graph, samples, per_edge, rule)
    if coins is None:
        coins = rng.random(m) < coin_prob
    coins = np.asarray(coins, dtype=bool)
    n_prof = np.atleast_2d(samples).shape[0]
    run = ProphetRun(m, consumed=np.zeros((n_prof, m), dtype=bool))
    for e in range(m):
        run.consumed[src[e], :] = True
    # coordinate e of profile p is unread when e is the only edge priced from p
    for p in np.unique(src):
        users = np.flatnonzero(src == p)
        if users.size == 1:
            run.consumed[p, users[0]] = False
    run.extra.update(edge_prices=prices, coins=coins)
    left, right = set(), set()
    for e, v in online:
        ed = graph.edges[e]
        free = ed.left not in left and ed.right not in right
        price = prices[e] if coins[e] and free else INF
        run.prices[e] = price
        if active is not None and not active[e]:
            run._log(e, v, price, "inactive", int(coins[e]))
            continue
        if not coins[e]:
            run._log(e, v, price, "discard", 0)
            continue
        if v > price:
            run.accepted.append(e)
            left.add(ed.left)
            right.add(ed.right)
            run._log(e, v, price, "accept", 1)
        else:
            run._log(e, v, price, "reject", 1)
    return run


# ---------------------------------------------------------------------------
# free order (the algorithm picks its own order)


def free_order_prophet(env: Environment, s, values, rng: np.random.Generator, active=None,
                       within=None) -> ProphetRun:
    """Free-order algorithm on the coupled instance: sample set from the sample profile.

    A Binomial(n, 1/2) uniform subset of coordinates is read from ``s``;
    the complementary coordinates are processed in span order with their
    values.  ``within`` orders elements inside a span group.
    """
    n = env.n
    k = int(rng.binomial(n, 0.5))
    S = [int(i) for i in rng.choice(n, size=k, replace=False)]
    res = free_order_run(env, S, s, values, order=within, active=active)
    run = ProphetRun(n)
    run.consumed[0, S] = True
    for y, price in res.prices.items():
        run.prices[y] = price
    run.accepted = list(res.accepted)
    acc = set(res.accepted)
    for g in res.groups:
        for y in g:
            state = "inactive" if active is not None and not active[y] else ("accept" if y in acc else "reject")
            run._log(y, values[y], res.prices[y], state)
    run.extra.update(sample_set=S, basis=res.basis)
    return run


# ---------------------------------------------------------------------------
# bindings


@dataclass(frozen=True)
class AlgorithmBinding:
    name: str
    env_kind: str
    ratio: float | None            # claimed competitive ratio, None when only asymptotic
    ratio_label: str
    comparison_based: bool
    chooses_order: bool
    runner: Callable = field(repr=False, compare=False)
    budget: Callable = field(repr=False, compare=False)   # env -> number of sample profiles
    asserted: bool = True

    def run(self, env, values, samples, order, rng, active=None, **params) -> ProphetRun:
        return self.runner(env, np.asarray(values, dtype=float), np.atleast_2d(samples), order, rng, active, **params)

    def samples_needed(self, env) -> int:
        return self.budget(env)


def _online(values, order):
    return [(int(i), float(values[i])) for i in order]


def _via_reduction(make: Callable[[Environment, np.random.Generator], OrderOblivious]):
    def runner(env, values, samples, order, rng, active=None, **params):
        alg = make(env, rng, **params)
        return reduce_secretary_to_prophet(alg, samples[0], _online(values, order), rng, active=active)
    return runner


def _rehearsal(env, values, samples, order, rng, active=None, **params):
    k = min(env.k, env.n)
    thr = rehearsal_thresholds(samples[0], k)
    run = rehearsal_run(thr, _online(values, order), active)
    run.consumed[0, :] = True
    return run


def _matching(env, values, samples, order, rng, active=None, **params):
    return p_matching(env.graph, samples, _online(values, order), rng, active=active, **params)


def _free_order(env, values, samples, order, rng, active=None, **params):
    return free_order_prophet(env, samples[0], values, rng, active=active)


def _partition_blocks(env, rng, **params):
    blocks = params.get("blocks", env.blocks if isinstance(env, PartitionMatroid) else [range(env.n)])
    return BlockwiseRank1(blocks)


def _one(env):
    return 1


def _expect(cls):
    def check(env):
        if not isinstance(env, cls):
            raise DomainError(f"algorithm needs a {cls.__name__}, got {type(env).__name__}")
    return check


_BINDINGS = {
    "rank1": AlgorithmBinding("rank1", "uniform-1", 0.25, "1/4", True, False,
                              _via_reduction(lambda env, rng, **p: Rank1Secretary()), _one),
    "uniform-k": AlgorithmBinding("rehearsal", "uniform-k", None, "1-O(1/sqrt(k))", True, False,
                                  _rehearsal, _one),
    "partition": AlgorithmBinding("blockwise", "partition", 0.25, "1/4 per block", True, False,
                                  _via_reduction(_partition_blocks), _one),
    "graphic": AlgorithmBinding("graphic-kp", "graphic", 1 / 8, "1/8", True, False,
                                _via_reduction(lambda env, rng, **p: GraphicKP(env, rng, p.get("coin"))), _one),
    "transversal": AlgorithmBinding("transversal-dp", "transversal", 1 / 16, "1/16", True, False,
                                    _via_reduction(lambda env, rng, **p: TransversalDP(env, **p)), _one),
    "laminar-approx": AlgorithmBinding("blockwise-laminar", "laminar-approx", 1 / (12 * math.sqrt(3)),
                                       "1/(12 sqrt 3), approximate blocks", True, False,
                                       _via_reduction(lambda env, rng, **p: BlockwiseRank1(laminar_blocks(env))),
                                       _one, asserted=False),
    "general-iid": AlgorithmBinding("gv", "general-iid", (1 - 1 / math.e) / 20, "(1-1/e)/20", True, False,
                                    _via_reduction(lambda env, rng, **p: GVRandomAssignment(env)), _one),
    "matching": AlgorithmBinding("p-matching", "matching", 1 / 6.75, "1/6.75", False, False,
                                 _matching, lambda env: env.d ** 2),
    "matching-greedy": AlgorithmBinding("p-matching-greedy", "matching", 1 / 13.5, "1/13.5 (greedy prices)",
                                        True, False,
                                        lambda *a, **p: _matching(*a, rule="greedy", **p),
                                        lambda env: env.d ** 2, asserted=False),
    "matching-per-edge": AlgorithmBinding("p-matching-per-edge", "matching", None, "none asserted", False, False,
                                          lambda *a, **p: _matching(*a, per_edge=True, **p),
                                          lambda env: env.n, asserted=False),
    "free-order": AlgorithmBinding("free-order", "matroid", 0.25, "1/4 (seller picks order)", True, True,
                                   _free_order, _one),
}

ENV_CHECKS = {
    "uniform-k": _expect(UniformMatroid),
    "partition": _expect(PartitionMatroid),
    "graphic": _expect(GraphicMatroid),
    "transversal": _expect(TransversalMatroid),
    "laminar-approx": _expect(LaminarMatroid),
    "matching": _expect(BipartiteMatching),
    "matching-greedy": _expect(BipartiteMatching),
    "matching-per-edge": _expect(BipartiteMatching),
}


def prophet_for(kind: str) -> AlgorithmBinding:
    try:
        return _BINDINGS[kind]
    except KeyError:
        raise DomainError(f"unknown environment kind {kind!r}; known: {sorted(_BINDINGS)}") from None


def binding_kinds() -> list[str]:
    return list(_BINDINGS)


def check_pairing(kind: str, env: Environment) -> None:
    check = ENV_CHECKS.get(kind)
    if check is not None:
        check(env)
    elif not env.is_matroid:
        raise DomainError(f"{kind} needs a matroid environment")


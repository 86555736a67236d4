"""Order-oblivious secretary algorithms and the free-order matroid algorithm.

Every order-oblivious algorithm follows one contract: it picks a sample
phase size ``k``, observes ``k`` (index, value) pairs without accepting
any, then answers online offers.  Each online answer is a posted price:
element ``i`` is accepted iff its value is strictly above ``price(i)``,
and ``price(i)`` never depends on ``i``'s own value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .env import (DomainError, Environment, GraphicMatroid, LaminarMatroid, PartitionMatroid,
                  TransversalMatroid, greedy_basis, spans)

NEG_INF = -math.inf
INF = math.inf


class OrderOblivious:
    name = "abstract"

    def __init__(self):
        self.accepted: list[int] = []

    def sample_phase_size(self, n: int, rng: np.random.Generator) -> int:
        return int(rng.binomial(n, 0.5))

    def observe(self, sample: Sequence[tuple[int, float]]) -> None:
        raise NotImplementedError

    def price(self, i: int) -> float:
        raise NotImplementedError

    def _accept(self, i: int, v: float) -> None:
        self.accepted.append(i)

    def offer(self, i: int, v: float) -> bool:
        if v > self.price(i):
            self._accept(i, v)
            return True
        return False


class Rank1Secretary(OrderOblivious):
    """Threshold = best sample-phase value; take the first strict exceeder."""
    name = "rank1"

    def __init__(self):
        super().__init__()
        self.threshold = NEG_INF

    def observe(self, sample):
        self.threshold = max((v for _, v in sample), default=NEG_INF)

    def price(self, i):
        return INF if self.accepted else self.threshold


class BlockwiseRank1(OrderOblivious):
    """Independent rank-1 runs on disjoint blocks of the universe."""
    name = "blockwise"

    def __init__(self, blocks: Sequence[Iterable[int]]):
        super().__init__()
        self.blocks = [tuple(b) for b in blocks]
        self.block_of: dict[int, int] = {}
        for b, block in enumerate(self.blocks):
            for e in block:
                if e in self.block_of:
                    raise DomainError(f"element {e} appears in two blocks")
                self.block_of[e] = b
        self.runs = [Rank1Secretary() for _ in self.blocks]

    def observe(self, sample):
        per_block: list[list] = [[] for _ in self.blocks]
        for i, v in sample:
            if i in self.block_of:
                per_block[self.block_of[i]].append((i, v))
        for run, s in zip(self.runs, per_block):
            run.observe(s)

    def price(self, i):
        b = self.block_of.get(i)
        return INF if b is None else self.runs[b].price(i)

    def _accept(self, i, v):
        self.runs[self.block_of[i]]._accept(i, v)
        super()._accept(i, v)


def graphic_blocks(env: GraphicMatroid, coin: int) -> list[list[int]]:
    """Per-vertex leaving-edge blocks of the orientation chosen by ``coin``.

    coin 0 orients every edge from its lower to its higher vertex, coin 1 the
    other way.  Block ``u`` lists the edges leaving ``u``; loops are dropped.
    """
    blocks: list[list[int]] = [[] for _ in range(env.n_vertices)]
    for e, (u, v) in enumerate(env.edges):
        if u == v:
            continue
        tail = min(u, v) if coin == 0 else max(u, v)
        blocks[tail].append(e)
    return blocks


class GraphicKP(BlockwiseRank1):
    name = "graphic-kp"

    def __init__(self, env: GraphicMatroid, rng: np.random.Generator | None = None, coin: int | None = None):
        if coin is None:
            coin = int(rng.integers(2))
        self.coin = coin
        super().__init__(graphic_blocks(env, coin))


def laminar_blocks(env: LaminarMatroid) -> list[list[int]]:
    """Disjoint blocks such that any one-per-block choice is feasible.

    Minimal family sets become blocks; elements of a set that lie in no
    child become singletons; whenever a set holds more blocks than its
    capacity they are merged round-robin down to the capacity.  Elements
    outside every set are singletons.
    """
    family = sorted(range(len(env.family)), key=lambda a: (len(env.family[a]), a))
    sets = [set(a) for a in env.family]
    inside: dict[int, list[list[int]]] = {}
    claimed: set[int] = set()
    for a in family:
        children = [c for c in inside if sets[c] < sets[a]]
        blocks: list[list[int]] = []
        for c in children:
            blocks.extend(inside.pop(c))
        covered = set().union(*(sets[c] for c in children)) if children else set()
        rest = sorted(sets[a] - covered)
        if not children:
            blocks.append(rest)
        else:
            blocks.extend([e] for e in rest)
        blocks = [b for b in blocks if b]
        cap = env.capacities[a]
        if cap <= 0:
            blocks = []
        elif len(blocks) > cap:
            blocks.sort(key=min)
            blocks = [sorted(sum(blocks[j::cap], [])) for j in range(cap)]
        inside[a] = blocks
        claimed |= sets[a]
    out = [b for bs in inside.values() for b in bs]
    out.extend([e] for e in range(env.n) if e not in claimed)
    return sorted(out, key=min)


class TransversalDP(OrderOblivious):
    """Ranked-right-vertex matching secretary for transversal matroids.

    The sample phase builds ``M0`` greedily: each sample takes the
    highest-ranked free right neighbour.  Each right vertex then carries the
    weight of its ``M0`` partner (or -inf).

    ``rule="threshold"``: an arrival is matched to the highest-ranked right
    neighbour whose ``M0`` weight it beats and which is still free in ``M1``.
    ``rule="literal"``: an arrival goes to the highest-ranked neighbour left
    unmatched by ``M0``, if that vertex is free in ``M1``; values are ignored.
    """
    name = "transversal-dp"

    def __init__(self, env: TransversalMatroid, ranking: Sequence[int] | None = None,
                 sample_order: str = "decreasing", rule: str = "threshold"):
        super().__init__()
        if rule not in ("threshold", "literal"):
            raise DomainError(f"unknown rule {rule!r}")
        if sample_order not in ("decreasing", "arrival"):
            raise DomainError(f"unknown sample order {sample_order!r}")
        self.env = env
        ranking = list(range(env.n_right)) if ranking is None else list(ranking)
        self.rank_of = {r: pos for pos, r in enumerate(ranking)}
        self.sample_order = sample_order
        self.rule = rule
        self.m0: dict[int, int] = {}          # right -> sample-phase left
        self.m0_weight = [NEG_INF] * env.n_right
        self.m1: dict[int, int] = {}          # right -> accepted left
        self.sampled: set[int] = set()

    def _ranked(self, left):
        return sorted(self.env.adjacency[left], key=self.rank_of.__getitem__)

    def observe(self, sample):
        sample = list(sample)
        if self.sample_order == "decreasing":
            sample.sort(key=lambda iv: (-iv[1], iv[0]))
        for i, v in sample:
            self.sampled.add(i)
            for r in self._ranked(i):
                if r not in self.m0:
                    self.m0[r] = i
                    self.m0_weight[r] = v
                    break

    def _target(self, i, v):
        for r in self._ranked(i):
            if self.rule == "literal":
                if r in self.m0:
                    continue
                return r if r not in self.m1 else None
            if r not in self.m1 and v > self.m0_weight[r]:
                return r
        return None

    def price(self, i):
        if i in self.sampled:
            return INF
        if self.rule == "literal":
            return NEG_INF if self._target(i, 0.0) is not None else INF
        free = [self.m0_weight[r] for r in self.env.adjacency[i] if r not in self.m1]
        return min(free, default=INF)

    def _accept(self, i, v):
        self.m1[self._target(i, v)] = i
        super()._accept(i, v)

    @property
    def matching(self) -> dict[int, int]:
        return dict(self.m1)


class GVRandomAssignment(OrderOblivious):
    """Matroid secretary for random assignments.

    Rank below 12: plain rank-1 secretary.  Otherwise observe half the input
    and accept anything above the (floor(r/4)+1)-th largest sample value
    while it stays feasible.
    """
    name = "gv"

    def __init__(self, env: Environment):
        super().__init__()
        self.env = env
        self.r = env.full_rank
        self.tracker = env.tracker()
        self.threshold = NEG_INF
        self.delegate = Rank1Secretary() if self.r < 12 else None

    def sample_phase_size(self, n, rng):
        if self.delegate is not None:
            return self.delegate.sample_phase_size(n, rng)
        return n // 2

    def observe(self, sample):
        if self.delegate is not None:
            self.delegate.observe(sample)
            return
        vals = sorted((v for _, v in sample), reverse=True)
        pos = self.r // 4
        self.threshold = vals[pos] if pos < len(vals) else NEG_INF

    def price(self, i):
        if self.delegate is not None:
            return self.delegate.price(i)
        return self.threshold if self.tracker.can_add(i) else INF

    def _accept(self, i, v):
        if self.delegate is not None:
            self.delegate._accept(i, v)
        else:
            self.tracker.try_add(i)
        super()._accept(i, v)


# ---------------------------------------------------------------------------
# functional entry points


def _run(alg: OrderOblivious, sample, online) -> list[int]:
    alg.observe(list(sample))
    for i, v in online:
        alg.offer(i, v)
    return list(alg.accepted)


def rank1_secretary(sample_values: Iterable[float], online: Iterable[tuple[int, float]]):
    """Accepted index (or None) for the rank-1 rule."""
    acc = _run(Rank1Secretary(), [(-1, v) for v in sample_values], online)
    return acc[0] if acc else None


def blockwise_rank1(blocks, sample_phase, online) -> tuple[int, ...]:
    return tuple(sorted(_run(BlockwiseRank1(blocks), sample_phase, online)))


def graphic_kp(env: GraphicMatroid, sample_phase, online, rng=None, coin=None) -> tuple[int, ...]:
    return tuple(sorted(_run(GraphicKP(env, rng, coin), sample_phase, online)))


def transversal_dp(env: TransversalMatroid, sample_phase, online, **kw) -> tuple[int, ...]:
    return tuple(sorted(_run(TransversalDP(env, **kw), sample_phase, online)))


def gv_random_assignment(env: Environment, sample_phase, online) -> tuple[int, ...]:
    return tuple(sorted(_run(GVRandomAssignment(env), sample_phase, online)))


def run_secretary(alg: OrderOblivious, values, rng: np.random.Generator,
                  online_order: Sequence[int] | None = None, sample_set: Sequence[int] | None = None):
    """Secretary-model run: a random prefix of the universe forms the sample phase.

    ``online_order`` (a permutation of the whole universe) fixes the order of
    the non-sample elements; ``sample_set`` pins the sample phase.
    """
    n = len(values)
    if sample_set is None:
        k = alg.sample_phase_size(n, rng)
        perm = rng.permutation(n)
        sample_set = [int(i) for i in perm[:k]]
    chosen = set(sample_set)
    order = range(n) if online_order is None else online_order
    return _run(alg, [(i, values[i]) for i in sample_set],
                [(i, values[i]) for i in order if i not in chosen])


# ---------------------------------------------------------------------------
# free-order algorithm


def span_cost(env: Environment, y: int, members: Iterable[int], w) -> float:
    """Weight of the first member (by decreasing weight) whose prefix spans ``y``; 0 if none."""
    w = np.asarray(w, dtype=float)
    z = sorted(members, key=lambda i: (-w[i], i))
    for i in range(1, len(z) + 1):
        if spans(env, z[:i], y):
            return float(w[z[i - 1]])
    return 0.0


@dataclass
class FreeOrderResult:
    accepted: list[int]
    basis: list[int]
    prices: dict[int, float] = field(default_factory=dict)
    groups: list[list[int]] = field(default_factory=list)


def free_order_run(env: Environment, sample_set: Iterable[int], sample_weights, values,
                   order: Sequence[int] | None = None, active=None) -> FreeOrderResult:
    """Free-order matroid algorithm given the sample set.

    The basis X_1, X_2, ... of the sample set is computed on
    ``sample_weights``; each remaining element y is processed in the group of
    the first prefix of X spanning it and accepted iff it stays independent
    and ``values[y]`` beats the weight of that prefix's last element.
    Elements spanned by no prefix go last with no threshold.  Within a group
    elements follow ``order`` (default: index order).
    """
    s = np.asarray(sample_weights, dtype=float)
    S = set(int(i) for i in sample_set)
    basis = greedy_basis(env, s, candidates=sorted(S))
    P = [i for i in (range(env.n) if order is None else order) if i not in S]
    groups: list[list[int]] = [[] for _ in range(len(basis) + 1)]
    for y in P:
        lo, hi = 1, len(basis) + 1          # smallest prefix length spanning y
        while lo < hi:
            mid = (lo + hi) // 2
            if spans(env, basis[:mid], y):
                hi = mid
            else:
                lo = mid + 1
        groups[lo - 1].append(y)
    t = env.tracker()
    res = FreeOrderResult([], basis, {}, groups)
    for g, members in enumerate(groups):
        thr = s[basis[g]] if g < len(basis) else NEG_INF
        for y in members:
            price = thr if t.can_add(y) else INF
            res.prices[y] = price
            if active is not None and not active[y]:
                continue
            if values[y] > price:
                t.try_add(y)
                res.accepted.append(y)
    return res


def free_order_jsz(env: Environment, values, rng: np.random.Generator, order=None) -> tuple[int, ...]:
    """Secretary version: Binomial(n, 1/2) uniformly chosen elements form the sample set."""
    n = env.n
    k = int(rng.binomial(n, 0.5))
    S = rng.choice(n, size=k, replace=False)
    return tuple(sorted(free_order_run(env, S, values, values, order).accepted))


def make_secretary(name: str, env: Environment, rng: np.random.Generator | None = None, **params) -> OrderOblivious:
    if name == "rank1":
        return Rank1Secretary()
    if name == "blockwise":
        if "blocks" in params:
            return BlockwiseRank1(params["blocks"])
        if isinstance(env, PartitionMatroid):
            return BlockwiseRank1(env.blocks)
        if isinstance(env, LaminarMatroid):
            return BlockwiseRank1(laminar_blocks(env))
        return BlockwiseRank1([range(env.n)])
    if name == "graphic-kp":
        return GraphicKP(env, rng, params.get("coin"))
    if name == "transversal-dp":
        return TransversalDP(env, **params)
    if name == "gv":
        return GVRandomAssignment(env)
    raise DomainError(f"unknown secretary algorithm {name!r}")


SECRETARY_NAMES = ("rank1", "blockwise", "graphic-kp", "transversal-dp", "gv", "free-order")

"""Selection environments and their exact offline oracles.

An environment is a universe ``0..n-1`` together with a downward-closed
family of feasible subsets.  Matroid kinds (uniform, partition, laminar,
graphic, transversal) additionally support rank/span queries; the
degree-bounded bipartite matching kind does not.

Tie rule used everywhere: among weight-maximizing feasible sets of
positive-weight elements, the one whose sorted index tuple is
lexicographically smallest wins.  Zero-weight elements are never selected.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

REL_TOL = 1e-9          # oracle cross-check tolerance
SOLVER_TOL = 1e-12      # tie detection inside the exact solvers; far below REL_TOL


class DomainError(ValueError):
    """Input outside the domain of an operation (bad index, bad structure)."""


class UnsupportedOperationError(TypeError):
    """Operation not defined for this environment kind."""


def _members(env: "Environment", members: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted(set(int(x) for x in members)))
    if out and (out[0] < 0 or out[-1] >= env.n):
        raise DomainError(f"element index out of range for n={env.n}: {out}")
    return out


def _close(a: float, b: float, tol: float = SOLVER_TOL) -> bool:
    return abs(a - b) <= tol * (1.0 + max(abs(a), abs(b)))


# ---------------------------------------------------------------------------
# independence trackers: incremental feasibility for greedy / online runs


class _Tracker:
    """Incremental independence test.  ``try_add`` commits on success."""

    def __init__(self, env):
        self.env = env
        self.members: list[int] = []

    def can_add(self, e: int) -> bool:
        return self.env.is_feasible(self.members + [e])

    def try_add(self, e: int) -> bool:
        if self.can_add(e):
            self._commit(e)
            return True
        return False

    def _commit(self, e: int) -> None:
        self.members.append(e)


class _CountTracker(_Tracker):
    # element -> list of (constraint id); capacities per constraint id
    def __init__(self, env, groups: list[list[int]], caps: list[int]):
        super().__init__(env)
        self.groups = groups
        self.left = list(caps)

    def can_add(self, e):
        return all(self.left[g] > 0 for g in self.groups[e])

    def _commit(self, e):
        for g in self.groups[e]:
            self.left[g] -= 1
        self.members.append(e)


class _ForestTracker(_Tracker):
    def __init__(self, env):
        super().__init__(env)
        self.parent = list(range(env.n_vertices))

    def _find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def can_add(self, e):
        u, v = self.env.edges[e]
        return self._find(u) != self._find(v)

    def _commit(self, e):
        u, v = self.env.edges[e]
        self.parent[self._find(u)] = self._find(v)
        self.members.append(e)


class _TransversalTracker(_Tracker):
    def __init__(self, env):
        super().__init__(env)
        self.match_right = [-1] * env.n_right

    def _augment(self, left, match_right, seen):
        for r in self.env.adjacency[left]:
            if r in seen:
                continue
            seen.add(r)
            if match_right[r] < 0 or self._augment(match_right[r], match_right, seen):
                match_right[r] = left
                return True
        return False

    def can_add(self, e):
        if e in self.members:
            return False
        return self._augment(e, list(self.match_right), set())

    def try_add(self, e):
        if e in self.members:
            return False
        trial = list(self.match_right)
        if self._augment(e, trial, set()):
            self.match_right = trial
            self.members.append(e)
            return True
        return False


class _MatchingTracker(_Tracker):
    def __init__(self, env):
        super().__init__(env)
        self.used_left: set[int] = set()
        self.used_right: set[int] = set()

    def can_add(self, e):
        ed = self.env.graph.edges[e]
        return ed.left not in self.used_left and ed.right not in self.used_right

    def _commit(self, e):
        ed = self.env.graph.edges[e]
        self.used_left.add(ed.left)
        self.used_right.add(ed.right)
        self.members.append(e)


# ---------------------------------------------------------------------------
# environments


class Environment:
    kind: str = "abstract"
    is_matroid: bool = True
    n: int

    def is_feasible(self, members: Iterable[int]) -> bool:
        raise NotImplementedError

    def tracker(self) -> _Tracker:
        return _Tracker(self)

    def rank(self, members: Iterable[int]) -> int:
        if not self.is_matroid:
            raise UnsupportedOperationError(f"rank is undefined for {self.kind}")
        t = self.tracker()
        for e in _members(self, members):
            t.try_add(e)
        return len(t.members)

    @property
    def full_rank(self) -> int:
        return self.rank(range(self.n))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformMatroid(Environment):
    n: int
    k: int
    kind = "uniform"

    def is_feasible(self, members):
        return len(_members(self, members)) <= self.k

    def tracker(self):
        return _CountTracker(self, [[0]] * self.n, [self.k])

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "k": self.k}


@dataclass(frozen=True)
class PartitionMatroid(Environment):
    n: int
    blocks: tuple[tuple[int, ...], ...]
    capacities: tuple[int, ...]
    kind = "partition"

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(sorted(b)) for b in self.blocks))
        object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))
        seen = sorted(itertools.chain.from_iterable(self.blocks))
        if seen != list(range(self.n)):
            raise DomainError("partition blocks must be disjoint and cover 0..n-1")
        if len(self.capacities) != len(self.blocks):
            raise DomainError("one capacity per block")

    def block_of(self, e: int) -> int:
        for b, block in enumerate(self.blocks):
            if e in block:
                return b
        raise DomainError(e)

    def is_feasible(self, members):
        m = set(_members(self, members))
        return all(len(m.intersection(b)) <= c for b, c in zip(self.blocks, self.capacities))

    def tracker(self):
        groups = [[self.block_of(e)] for e in range(self.n)]
        return _CountTracker(self, groups, list(self.capacities))

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "blocks": [list(b) for b in self.blocks],
                "capacities": list(self.capacities)}


@dataclass(frozen=True)
class LaminarMatroid(Environment):
    n: int
    family: tuple[tuple[int, ...], ...]
    capacities: tuple[int, ...]
    kind = "laminar"

    def __post_init__(self):
        object.__setattr__(self, "family", tuple(tuple(sorted(set(a))) for a in self.family))
        object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))
        if len(self.capacities) != len(self.family):
            raise DomainError("one capacity per family member")
        for a in self.family:
            if a and (a[0] < 0 or a[-1] >= self.n):
                raise DomainError("family member outside universe")
        for a, b in itertools.combinations(self.family, 2):
            sa, sb = set(a), set(b)
            if not (sa <= sb or sb <= sa or not (sa & sb)):
                raise DomainError(f"family is not laminar: {a} vs {b}")

    def is_feasible(self, members):
        m = set(_members(self, members))
        return all(len(m.intersection(a)) <= c for a, c in zip(self.family, self.capacities))

    def tracker(self):
        groups = [[g for g, a in enumerate(self.family) if e in a] for e in range(self.n)]
        return _CountTracker(self, groups, list(self.capacities))

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "family": [list(a) for a in self.family],
                "capacities": list(self.capacities)}


@dataclass(frozen=True)
class GraphicMatroid(Environment):
    """Edges of a multigraph; a set is feasible iff it is a forest.

    Self-loops are never feasible; parallel edges form a 2-cycle.
    """
    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    kind = "graphic"

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        for u, v in self.edges:
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise DomainError(f"edge ({u},{v}) outside vertex set")

    @property
    def n(self):
        return len(self.edges)

    def is_feasible(self, members):
        t = _ForestTracker(self)
        return all(t.try_add(e) for e in _members(self, members))

    def tracker(self):
        return _ForestTracker(self)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "vertices": self.n_vertices,
                "edges": [list(e) for e in self.edges]}


@dataclass(frozen=True)
class TransversalMatroid(Environment):
    """Left vertices of a bipartite graph; feasible iff matchable into the right side."""
    n_left: int
    n_right: int
    adjacency: tuple[tuple[int, ...], ...]
    kind = "transversal"

    def __post_init__(self):
        object.__setattr__(self, "adjacency", tuple(tuple(int(r) for r in a) for a in self.adjacency))
        if len(self.adjacency) != self.n_left:
            raise DomainError("adjacency needs one entry per left vertex")
        for a in self.adjacency:
            if any(not 0 <= r < self.n_right for r in a):
                raise DomainError("right vertex out of range")

    @property
    def n(self):
        return self.n_left

    def is_feasible(self, members):
        t = _TransversalTracker(self)
        return all(t.try_add(e) for e in _members(self, members))

    def tracker(self):
        return _TransversalTracker(self)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "right": self.n_right,
                "adjacency": [list(a) for a in self.adjacency]}


@dataclass(frozen=True)
class Edge:
    left: int
    right: int
    left_ordinal: int
    right_ordinal: int


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph whose edges carry their incidence ordinal at each endpoint."""
    n_left: int
    n_right: int
    edges: tuple[Edge, ...]
    d: int

    @classmethod
    def from_pairs(cls, n_left: int, n_right: int, pairs: Sequence[tuple[int, int]], d: int | None = None):
        """Build a graph, assigning ordinals in order of appearance at each endpoint."""
        cl = [0] * n_left
        cr = [0] * n_right
        edges = []
        for l, r in pairs:
            edges.append(Edge(int(l), int(r), cl[l], cr[r]))
            cl[l] += 1
            cr[r] += 1
        deg = max(cl + cr + [1])
        return cls(n_left, n_right, tuple(edges), deg if d is None else d)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges))
        seen_l, seen_r = set(), set()
        for e in self.edges:
            if not (0 <= e.left < self.n_left and 0 <= e.right < self.n_right):
                raise DomainError(f"edge endpoint out of range: {e}")
            if not (0 <= e.left_ordinal < self.d and 0 <= e.right_ordinal < self.d):
                raise DomainError(f"incidence ordinal outside 0..d-1: {e}")
            if (e.left, e.left_ordinal) in seen_l or (e.right, e.right_ordinal) in seen_r:
                raise DomainError(f"duplicate incidence ordinal at an endpoint: {e}")
            seen_l.add((e.left, e.left_ordinal))
            seen_r.add((e.right, e.right_ordinal))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def conflicts(self, i: int) -> list[int]:
        """Edges other than ``i`` sharing an endpoint with ``i``."""
        e = self.edges[i]
        return [j for j, f in enumerate(self.edges)
                if j != i and (f.left == e.left or f.right == e.right)]


@dataclass(frozen=True)
class BipartiteMatching(Environment):
    graph: BipartiteGraph
    kind = "matching"
    is_matroid = False

    @property
    def n(self):
        return self.graph.n_edges

    @property
    def d(self):
        return self.graph.d

    def is_feasible(self, members):
        t = _MatchingTracker(self)
        return all(t.try_add(e) for e in _members(self, members))

    def tracker(self):
        return _MatchingTracker(self)

    def to_dict(self):
        g = self.graph
        return {"kind": self.kind, "n": self.n, "left": g.n_left, "right": g.n_right, "d": g.d,
                "edges": [{"left": e.left, "right": e.right, "leftOrdinal": e.left_ordinal,
                           "rightOrdinal": e.right_ordinal} for e in g.edges]}


# ---------------------------------------------------------------------------
# module-level oracles


def is_feasible(env: Environment, members: Iterable[int]) -> bool:
    return env.is_feasible(members)


def rank_and_span(env: Environment, members: Iterable[int], element: int) -> tuple[int, bool]:
    """Rank of ``members`` and whether adding ``element`` leaves the rank unchanged."""
    if not env.is_matroid:
        raise UnsupportedOperationError(f"rank/span undefined for {env.kind}")
    m = _members(env, members)
    _members(env, [element])
    r = env.rank(m)
    return r, env.rank(m + (element,)) == r


def spans(env: Environment, members: Iterable[int], element: int) -> bool:
    return rank_and_span(env, members, element)[1]


def _greedy_order(w: np.ndarray, candidates: Iterable[int] | None = None) -> list[int]:
    idx = range(len(w)) if candidates is None else candidates
    return sorted((i for i in idx if w[i] > 0), key=lambda i: (-w[i], i))


def greedy_basis(env: Environment, w, candidates: Iterable[int] | None = None) -> list[int]:
    """Max-weight independent subset of ``candidates``, in greedy (decreasing weight) order."""
    w = np.asarray(w, dtype=float)
    t = env.tracker()
    return [e for e in _greedy_order(w, candidates) if t.try_add(e)]


def _weights(env, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (env.n,):
        raise DomainError(f"weight vector must have length {env.n}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite and non-negative")
    return w


def matching_value(graph: BipartiteGraph, w, skip_edges=(), skip_vertices=((), ())) -> float:
    """Weight of a maximum-weight matching, ignoring some edges and vertices."""
    skip_l, skip_r = skip_vertices
    mat = np.zeros((graph.n_left, graph.n_right))
    skip = set(skip_edges)
    for i, e in enumerate(graph.edges):
        if i in skip or e.left in skip_l or e.right in skip_r:
            continue
        if w[i] > mat[e.left, e.right]:
            mat[e.left, e.right] = w[i]
    if mat.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(mat, maximize=True)
    return float(mat[rows, cols].sum())


def _max_matching(graph: BipartiteGraph, w: np.ndarray) -> tuple[list[int], float]:
    opt = matching_value(graph, w)
    chosen: list[int] = []
    excluded: set[int] = set()
    used_l: set[int] = set()
    used_r: set[int] = set()
    remaining = opt
    for i in sorted(i for i in range(graph.n_edges) if w[i] > 0):
        e = graph.edges[i]
        if e.left in used_l or e.right in used_r:
            continue
        rest = matching_value(graph, w, excluded, (used_l | {e.left}, used_r | {e.right}))
        if _close(w[i] + rest, remaining) or w[i] + rest > remaining:
            chosen.append(i)
            used_l.add(e.left)
            used_r.add(e.right)
            remaining = rest
        else:
            excluded.add(i)
    return chosen, float(sum(w[i] for i in chosen))


def offline_opt(env: Environment, w) -> tuple[tuple[int, ...], float]:
    """MAX(w) and OPT(w) under the module tie rule."""
    w = _weights(env, w)
    if isinstance(env, BipartiteMatching):
        chosen, val = _max_matching(env.graph, w)
        return tuple(sorted(chosen)), val
    if not env.is_matroid:
        return _exhaustive_opt(env, w)
    chosen = greedy_basis(env, w)
    return tuple(sorted(chosen)), float(sum(w[i] for i in chosen))


def _exhaustive_opt(env: Environment, w: np.ndarray, cap: int = 20) -> tuple[tuple[int, ...], float]:
    """Subset search for feasibility systems without a structural solver."""
    pos = [i for i in range(env.n) if w[i] > 0]
    if len(pos) > cap:
        raise UnsupportedOperationError(f"exhaustive optimum limited to {cap} positive weights")
    best, best_val = (), 0.0
    for r in range(1, len(pos) + 1):
        for sub in itertools.combinations(pos, r):
            val = float(sum(w[i] for i in sub))
            if val > best_val and not _close(val, best_val) and env.is_feasible(sub):
                best, best_val = sub, val
    return best, best_val


def opt_value(env: Environment, w) -> float:
    """OPT(w) only; skips the tie-breaking work for matchings."""
    w = np.asarray(w, dtype=float)
    if isinstance(env, BipartiteMatching):
        return matching_value(env.graph, w)
    if isinstance(env, UniformMatroid):
        top = np.sort(w[w > 0])[::-1][:env.k]
        return float(top.sum())
    if not env.is_matroid:
        return _exhaustive_opt(env, w)[1]
    return float(sum(w[i] for i in greedy_basis(env, w)))


def edge_index(graph: BipartiteGraph, e: int) -> int:
    """Sample slot for edge ``e``: ``1 + j + d*k`` from its endpoint ordinals."""
    ed = graph.edges[e]
    return 1 + ed.left_ordinal + graph.d * ed.right_ordinal


def edge_threshold(graph: BipartiteGraph, e: int, others) -> float:
    """Smallest weight putting ``e`` into the max-weight matching, other weights fixed.

    ``others`` is a full-length weight vector; its entry for ``e`` is ignored.
    """
    ed = graph.edges[e]
    w = np.asarray(others, dtype=float)
    without = matching_value(graph, w, skip_edges=(e,))
    blocked = matching_value(graph, w, skip_edges=(e,), skip_vertices=({ed.left}, {ed.right}))
    return max(without - blocked, 0.0)


# ---------------------------------------------------------------------------
# serialization


def env_from_dict(d: dict) -> Environment:
    kind = d["kind"]
    if kind == "uniform":
        return UniformMatroid(int(d["n"]), int(d["k"]))
    if kind == "partition":
        return PartitionMatroid(int(d["n"]), tuple(map(tuple, d["blocks"])), tuple(d["capacities"]))
    if kind == "laminar":
        return LaminarMatroid(int(d["n"]), tuple(map(tuple, d["family"])), tuple(d["capacities"]))
    if kind == "graphic":
        env = GraphicMatroid(int(d["vertices"]), tuple(tuple(e) for e in d["edges"]))
    elif kind == "transversal":
        env = TransversalMatroid(len(d["adjacency"]), int(d["right"]), tuple(map(tuple, d["adjacency"])))
    elif kind == "matching":
        edges = tuple(Edge(e["left"], e["right"], e["leftOrdinal"], e["rightOrdinal"]) for e in d["edges"])
        env = BipartiteMatching(BipartiteGraph(int(d["left"]), int(d["right"]), edges, int(d["d"])))
    else:
        raise DomainError(f"unknown environment kind {kind!r}")
    if "n" in d and int(d["n"]) != env.n:
        raise DomainError(f"declared n={d['n']} but structure has {env.n} elements")
    return env


def env_to_json(env: Environment) -> str:
    return json.dumps(env.to_dict(), sort_keys=True)


def env_from_json(text: str) -> Environment:
    return env_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# random instances


def random_graphic(n_vertices: int, n_edges: int, rng: np.random.Generator, loops=False) -> GraphicMatroid:
    edges = []
    while len(edges) < n_edges:
        u, v = (int(x) for x in rng.integers(0, n_vertices, 2))
        if u == v and not loops:
            continue
        edges.append((u, v))
    return GraphicMatroid(n_vertices, tuple(edges))


def random_transversal(n_left: int, n_right: int, max_deg: int, rng: np.random.Generator) -> TransversalMatroid:
    adj = []
    for _ in range(n_left):
        deg = int(rng.integers(1, max_deg + 1))
        adj.append(tuple(sorted(int(r) for r in rng.choice(n_right, size=min(deg, n_right), replace=False))))
    return TransversalMatroid(n_left, n_right, tuple(adj))


def random_bipartite(n_left: int, n_right: int, d: int, n_edges: int, rng: np.random.Generator) -> BipartiteGraph:
    """Random simple bipartite graph with max degree ``d`` (may have fewer edges if saturated)."""
    dl = [0] * n_left
    dr = [0] * n_right
    pairs: list[tuple[int, int]] = []
    cand = [(l, r) for l in range(n_left) for r in range(n_right)]
    for c in rng.permutation(len(cand)):
        l, r = cand[c]
        if dl[l] < d and dr[r] < d:
            pairs.append((l, r))
            dl[l] += 1
            dr[r] += 1
            if len(pairs) == n_edges:
                break
    return BipartiteGraph.from_pairs(n_left, n_right, pairs, d=d)


def random_partition(n: int, n_blocks: int, rng: np.random.Generator, max_cap: int = 2) -> PartitionMatroid:
    labels = rng.integers(0, n_blocks, n)
    blocks = [tuple(int(i) for i in np.flatnonzero(labels == b)) for b in range(n_blocks)]
    blocks = [b for b in blocks if b]
    caps = tuple(int(c) for c in rng.integers(1, max_cap + 1, len(blocks)))
    return PartitionMatroid(n, tuple(blocks), caps)


def random_laminar(n: int, rng: np.random.Generator, max_cap: int = 3) -> LaminarMatroid:
    """Recursive random splits of the universe; every split set gets a capacity."""
    family: list[tuple[int, ...]] = []

    def split(items):
        if len(items) < 2:
            return
        family.append(tuple(items))
        cut = int(rng.integers(1, len(items)))
        perm = list(rng.permutation(items))
        for part in (perm[:cut], perm[cut:]):
            if rng.random() < 0.7:
                split(sorted(int(x) for x in part))

    split(list(range(n)))
    caps = tuple(int(c) for c in rng.integers(1, max_cap + 1, len(family)))
    return LaminarMatroid(n, tuple(family), caps)

"""Posted-price mechanisms built on the prophet algorithms.

Every allocation rule here posts each bidder a price that does not depend
on their own bid, so the truthful payment of a winner is simply that price
(raised to the bidder's reserve when reserves are applied).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dist import Marginal, NotRegularError, ProductDistribution
from .env import BipartiteGraph, BipartiteMatching, DomainError, Environment, _members, _Tracker, opt_value
from .prophet import AlgorithmBinding, ProphetRun, free_order_prophet, prophet_for

RESERVE_KINDS = ("none", "monopoly", "single-sample", "quantile")


def threshold_payment(accepted: bool, threshold: float) -> float:
    """Payment of a step allocation rule: the step location for winners, else 0."""
    if not accepted:
        return 0.0
    return max(float(threshold), 0.0)


@dataclass(frozen=True)
class ReservePolicy:
    kind: str = "none"
    application: str = "lazy"
    p: float | None = None

    def __post_init__(self):
        if self.kind not in RESERVE_KINDS:
            raise DomainError(f"unknown reserve kind {self.kind!r}")
        if self.application not in ("lazy", "eager"):
            raise DomainError(f"unknown reserve application {self.application!r}")
        if self.kind == "quantile" and (self.p is None or not 0.0 <= self.p <= 1.0):
            raise DomainError("quantile reserves need p in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict | None) -> "ReservePolicy":
        if not d:
            return cls()
        return cls(d.get("kind", "none"), d.get("application", "lazy"), d.get("p"))


@dataclass
class MechanismOutcome:
    winners: tuple[int, ...]
    payments: dict[int, float]
    welfare: float
    revenue: float
    reserves: np.ndarray | None = None
    run: ProphetRun | None = field(default=None, repr=False)

    def check_ir(self, values, tol: float = 1e-12) -> bool:
        ok = all(0.0 <= p <= values[i] + tol for i, p in self.payments.items())
        return ok and set(self.payments) == set(self.winners)

    def utility(self, i: int, value: float) -> float:
        return value - self.payments[i] if i in self.payments else 0.0


def _reserve_of(m: Marginal, policy: ReservePolicy, draw: Callable[[], float]) -> float:
    if policy.kind == "none":
        return 0.0
    if policy.kind == "monopoly":
        return m.monopoly_reserve()
    if policy.kind == "quantile":
        return float(m.quantile(policy.p))
    return draw()


def draw_reserves(policy: ReservePolicy, dist: ProductDistribution | None, rng: np.random.Generator,
                  samples=None, consumed=None) -> np.ndarray:
    """Per-bidder reserves.

    Sample reserves reuse a sample coordinate the algorithm never read
    (first unread profile) and fall back to a fresh draw.
    """
    if policy.kind == "none":
        n = dist.n if dist is not None else (np.shape(samples)[-1] if samples is not None else 0)
        return np.zeros(n)
    if dist is None:
        raise DomainError(f"{policy.kind} reserves need a distribution")
    if policy.kind == "monopoly" and not dist.is_regular:
        raise NotRegularError("monopoly reserves need regular marginals")
    out = np.empty(dist.n)
    for i, m in enumerate(dist.marginals):
        def draw(i=i, m=m):
            if samples is not None and consumed is not None:
                free = np.flatnonzero(~consumed[:, i])
                if free.size:
                    return float(samples[free[0], i])
            return float(m.sample(rng))
        out[i] = _reserve_of(m, policy, draw)
    return out


def apply_reserves(pipeline: Callable[[np.ndarray | None], ProphetRun], values, policy: ReservePolicy,
                   dist: ProductDistribution | None, rng: np.random.Generator, samples=None) -> MechanismOutcome:
    """Compose an allocation pipeline with reserves and charge threshold payments.

    ``pipeline(active)`` runs the allocation rule, offering only to bidders
    with ``active[i]`` true (all when ``active`` is None).  Lazy: run on
    everyone, then drop winners below their reserve.  Eager: drop bidders
    below their reserve, then run.  Winners pay max(posted price, reserve).
    """
    values = np.asarray(values, dtype=float)
    if policy.application == "eager" and policy.kind != "none":
        r = draw_reserves(policy, dist, rng)
        run = pipeline(values >= r)
        winners = list(run.accepted)
    else:
        run = pipeline(None)
        r = draw_reserves(policy, dist, rng, samples, run.consumed)
        winners = [i for i in run.accepted if values[i] >= r[i]]
    payments = {i: max(threshold_payment(True, run.prices[i]), float(r[i])) for i in winners}
    return MechanismOutcome(tuple(sorted(winners)), payments, float(sum(values[i] for i in winners)),
                            float(sum(payments.values())), r, run)


def run_mechanism(binding: AlgorithmBinding, env: Environment, values, samples, order, rng: np.random.Generator,
                  policy: ReservePolicy = ReservePolicy(), dist: ProductDistribution | None = None,
                  **params) -> MechanismOutcome:
    """Allocation by a prophet algorithm plus reserves; algorithm and reserve draws use separate streams."""
    alg_seed, res_seed = rng.integers(0, 2**63, 2)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))

    def pipeline(active):
        return binding.run(env, values, samples, order, np.random.default_rng(alg_seed), active=active, **params)

    return apply_reserves(pipeline, values, policy, dist, np.random.default_rng(res_seed), samples)


def accept_all(n: int):
    """Allocation that gives every active bidder an item at price 0 (reserve-only posted prices)."""
    def pipeline(active):
        run = ProphetRun(n)
        run.prices[:] = 0.0
        run.accepted = [i for i in range(n) if active is None or active[i]]
        return run
    return pipeline


# ---------------------------------------------------------------------------
# revenue benchmark


def myerson_benchmark(env: Environment, dist: ProductDistribution, trials: int, rng: np.random.Generator):
    """Monte-Carlo optimal revenue: E[max feasible sum of non-negative virtual values].

    Returns (mean, standard error).
    """
    if not dist.is_regular:
        raise NotRegularError("the benchmark needs regular marginals")
    vals = np.empty(trials)
    for t in range(trials):
        phi = np.maximum(dist.virtual_values(dist.sample(rng)), 0.0)
        vals[t] = opt_value(env, phi)
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(vals.mean()), se


def revenue_guarantee(alpha: float, dist: ProductDistribution) -> float | None:
    """Revenue fraction promised by lazy sample reserves on an alpha-welfare rule."""
    if dist.iid and dist.is_regular:
        return alpha / 2
    if dist.is_mhr:
        return alpha / (2 * math.e)
    return None


# ---------------------------------------------------------------------------
# multi-item unit-demand buyers


class _CopiesTracker(_Tracker):
    def __init__(self, env: "CopiesEnvironment"):
        super().__init__(env)
        self.buyers: set[int] = set()
        self.items: set[int] = set()
        self.item_tracker = env.items.tracker()

    def can_add(self, e):
        b, j = self.env.agents[e]
        return b not in self.buyers and j not in self.items and self.item_tracker.can_add(j)

    def _commit(self, e):
        b, j = self.env.agents[e]
        self.buyers.add(b)
        self.items.add(j)
        self.item_tracker.try_add(j)
        super()._commit(e)


@dataclass(frozen=True)
class CopiesEnvironment(Environment):
    """One agent per (buyer, item): each buyer takes one item, each item one buyer, and
    the set of sold items must be feasible in ``items``."""
    agents: tuple[tuple[int, int], ...]
    items: Environment
    kind = "copies"
    is_matroid = False

    @property
    def n(self):
        return len(self.agents)

    def is_feasible(self, members):
        t = self.tracker()
        return all(t.try_add(e) for e in _members(self, members))

    def tracker(self):
        return _CopiesTracker(self)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "agents": [list(a) for a in self.agents],
                "items": self.items.to_dict()}


@dataclass
class CopiesInstance:
    n_buyers: int
    n_items: int
    agents: list[tuple[int, int]]
    env: Environment
    dist: ProductDistribution

    def agent_of(self, buyer: int, item: int) -> int:
        return self.agents.index((buyer, item))


def build_copies(n_buyers: int, n_items: int, marginals: Sequence[Sequence[Marginal | None]],
                 source: Environment | str = "matching") -> CopiesInstance:
    """Single-dimensional copies of a unit-demand market.

    ``marginals[i][j]`` is buyer i's value distribution for item j, or None
    when the buyer has no interest in the item (sparse valuations).  With
    ``source="matching"`` every item has one unit and the result is a
    bipartite-matching environment whose degree is the sparsity.  Otherwise
    ``source`` is an environment over the items that the sold set must obey.
    """
    if len(marginals) != n_buyers or any(len(row) != n_items for row in marginals):
        raise DomainError("marginals must be an n_buyers x n_items table")
    agents = [(i, j) for i in range(n_buyers) for j in range(n_items) if marginals[i][j] is not None]
    dist = ProductDistribution(tuple(marginals[i][j] for i, j in agents))
    if isinstance(source, str):
        if source != "matching":
            raise DomainError(f"unknown copies source {source!r}")
        env = BipartiteMatching(BipartiteGraph.from_pairs(n_buyers, n_items, agents))
    else:
        if source.n != n_items:
            raise DomainError("item environment size must equal n_items")
        env = CopiesEnvironment(tuple(agents), source)
    return CopiesInstance(n_buyers, n_items, agents, env, dist)


def order_values(values, strategy, rng: np.random.Generator | None = None) -> list[int]:
    values = np.asarray(values)
    if isinstance(strategy, str):
        if strategy == "increasing":
            return [int(i) for i in np.lexsort((np.arange(values.size), values))]
        if strategy == "decreasing":
            return [int(i) for i in np.lexsort((np.arange(values.size), -values))]
        if strategy == "random":
            return [int(i) for i in rng.permutation(values.size)]
        raise DomainError(f"unknown order strategy {strategy!r}")
    order = [int(i) for i in strategy]
    if sorted(order) != list(range(values.size)):
        raise DomainError("fixed order must be a permutation of the universe")
    return order


def opm_revenue_run(copies: CopiesInstance, binding: AlgorithmBinding | str, policy: ReservePolicy,
                    order, rng: np.random.Generator, samples=None, values=None) -> MechanismOutcome:
    """One order-oblivious posted-price run on a copies instance."""
    if isinstance(binding, str):
        binding = prophet_for(binding)
    dist = copies.dist
    if values is None:
        values = dist.sample(rng)
    need = binding.samples_needed(copies.env)
    if samples is None:
        samples = dist.sample_many(rng, need)
    samples = np.atleast_2d(samples)
    if samples.shape[0] < need:
        raise DomainError(f"{binding.name} needs {need} sample profiles, got {samples.shape[0]}")
    return run_mechanism(binding, copies.env, values, samples, order_values(values, order, rng), rng, policy, dist)


def spm_free_order(env: Environment, dist: ProductDistribution, policy: ReservePolicy, rng: np.random.Generator,
                   values=None, sample=None) -> MechanismOutcome:
    """Sequential posted prices: the free-order algorithm picks the order, one sample profile."""
    if not env.is_matroid:
        raise DomainError("free-order pricing needs a matroid")
    if values is None:
        values = dist.sample(rng)
    if sample is None:
        sample = dist.sample(rng)
    alg_seed, res_seed = rng.integers(0, 2**63, 2)
    values = np.asarray(values, dtype=float)

    def pipeline(active):
        return free_order_prophet(env, sample, values, np.random.default_rng(alg_seed), active=active)

    return apply_reserves(pipeline, values, policy, dist, np.random.default_rng(res_seed), np.atleast_2d(sample))


SPM_GUARANTEES = {"welfare-mhr": 1 / 8, "revenue-mhr": 1 / (8 * math.e), "revenue-iid-regular": 1 / 8}


# ---------------------------------------------------------------------------
# comparison-based selection mass


@dataclass
class ComparisonMass:
    q: np.ndarray                 # selection frequency per bidder, bidders listed by decreasing value
    stderr: np.ndarray
    prefix: np.ndarray            # cumulative q
    J: np.ndarray                 # largest feasible subset within each prefix
    alpha: float | None
    invariant: bool               # identical decisions under both embeddings, every trial


def _prefix_rank(env: Environment, ranked: Sequence[int]) -> np.ndarray:
    t = env.tracker()
    out, c = [], 0
    for e in ranked:
        c += t.try_add(e)
        out.append(c)
    return np.array(out)


def comparison_mass_check(binding: AlgorithmBinding | str, env: Environment, arrival: Sequence[int],
                          trials: int, rng: np.random.Generator,
                          embeddings: Sequence[Callable] = (lambda x: x, lambda x: x ** 3)) -> ComparisonMass:
    """Selection mass of each bidder when the bidders' value ranking is fixed.

    Bidder 0 always holds the highest value, bidder 1 the second, and so on;
    bidders arrive in ``arrival``.  Each trial draws 2n iid uniforms, gives
    the n largest-to-smallest of the value half to bidders 0..n-1 and uses
    the rest as one sample profile; every embedding is applied to both and
    the algorithm is rerun with the same seed.
    """
    if isinstance(binding, str):
        binding = prophet_for(binding)
    if binding.samples_needed(env) != 1:
        raise DomainError("mass check supports single-sample algorithms")
    n = env.n
    hits = np.zeros((trials, n))
    invariant = True
    for t in range(trials):
        u = rng.random(2 * n)
        vals = -np.sort(-u[:n])
        samp = u[n:]
        seed = int(rng.integers(0, 2**63))
        first = None
        for g in embeddings:
            run = binding.run(env, g(vals), g(samp)[None, :], list(arrival), np.random.default_rng(seed))
            acc = run.accepted_set
            if first is None:
                first = acc
            elif acc != first:
                invariant = False
        hits[t, list(first)] = 1.0
    q = hits.mean(axis=0)
    se = hits.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(n)
    return ComparisonMass(q, se, np.cumsum(q), _prefix_rank(env, range(n)), binding.ratio, invariant)

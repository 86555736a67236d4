"""Experiment runner, order strategies, paired-ratio statistics and verification suites."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import _kernels, walk
from .dist import ProductDistribution, Uniform, dist_from_dict, trial_rng
from .env import (DomainError, Environment, UniformMatroid, env_from_dict, greedy_basis, opt_value,
                  random_graphic, random_laminar, random_partition, random_transversal)
from .mech import ReservePolicy, order_values, run_mechanism
from .prophet import AlgorithmBinding, binding_kinds, check_pairing, prophet_for, rehearsal_thresholds
from .secretary import free_order_run, span_cost

ORDER_STRATEGIES = ("increasing", "decreasing", "random", "fixed", "exhaustive")
SUITES = ("walk-exact", "order-lemma", "secretary-exhaustive", "mech-ir", "ratios")


def resolve_algorithm(name: str) -> tuple[str, AlgorithmBinding]:
    """Accept a binding kind ("graphic") or an algorithm name ("graphic-kp")."""
    if name in binding_kinds():
        return name, prophet_for(name)
    for kind in binding_kinds():
        if prophet_for(kind).name == name:
            return kind, prophet_for(kind)
    raise DomainError(f"unknown algorithm {name!r}")


@dataclass
class ExperimentConfig:
    env: Environment
    dist: ProductDistribution
    algorithm: str
    params: dict = field(default_factory=dict)
    order: object = "random"          # strategy name or explicit permutation
    trials: int = 1000
    seed: int = 0
    reserve: ReservePolicy = field(default_factory=ReservePolicy)
    output: str | None = None
    benchmark_only: bool = False
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.dist.n != self.env.n:
            raise DomainError(f"distribution has {self.dist.n} coordinates, environment {self.env.n}")
        strategy = self.order if isinstance(self.order, str) else "fixed"
        if strategy not in ORDER_STRATEGIES:
            raise DomainError(f"unknown order strategy {self.order!r}")
        if strategy == "exhaustive" and self.env.n > 8:
            raise DomainError("exhaustive order search is limited to n <= 8")
        if not self.benchmark_only:
            kind, _ = resolve_algorithm(self.algorithm)
            check_pairing(kind, self.env)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        env = env_from_dict(d["env"])
        order = d.get("order", "random")
        if isinstance(order, dict):
            order = order["fixed"]
        alg = d.get("algorithm", {})
        if isinstance(alg, str):
            alg = {"name": alg}
        return cls(env=env, dist=dist_from_dict(d["dist"], env.n), algorithm=alg.get("name", ""),
                   params=alg.get("params", {}), order=order, trials=int(d.get("trials", 1000)),
                   seed=int(d.get("seed", 0)), reserve=ReservePolicy.from_dict(d.get("reserve")),
                   output=d.get("output"), benchmark_only=bool(d.get("benchmark_only", False)), raw=d)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class TrialRecord:
    trial: int
    welfare: float
    revenue: float
    opt: float
    revenue_opt: float | None
    winners: list[int]
    order: list[int] | None = None


@dataclass
class PairedRatio:
    ratio: float
    stderr: float
    mean_alg: float
    mean_opt: float

    @property
    def ci_half_width(self) -> float:
        return 1.96 * self.stderr


def paired_ratio(alg, opt) -> PairedRatio:
    """Ratio of means with a delta-method standard error from the paired differences."""
    alg = np.asarray(alg, dtype=float)
    opt = np.asarray(opt, dtype=float)
    ma, mo = float(alg.mean()), float(opt.mean())
    if mo == 0:
        return PairedRatio(math.nan, math.nan, ma, mo)
    r = ma / mo
    if alg.size < 2:
        return PairedRatio(r, 0.0, ma, mo)
    d = alg - r * opt
    return PairedRatio(r, float(d.std(ddof=1) / (math.sqrt(alg.size) * mo)), ma, mo)


def _trial(cfg: ExperimentConfig, binding: AlgorithmBinding | None, t: int) -> TrialRecord:
    rng = trial_rng(cfg.seed, t)
    values = cfg.dist.sample(rng)
    opt = opt_value(cfg.env, values)
    rev_opt = None
    if cfg.dist.is_regular:
        rev_opt = opt_value(cfg.env, np.maximum(cfg.dist.virtual_values(values), 0.0))
    if binding is None:
        return TrialRecord(t, 0.0, 0.0, opt, rev_opt, [])
    samples = cfg.dist.sample_many(rng, binding.samples_needed(cfg.env))
    alg_seed = int(rng.integers(0, 2**63))

    def run(order):
        return run_mechanism(binding, cfg.env, values, samples, order, np.random.default_rng(alg_seed),
                             cfg.reserve, cfg.dist, **cfg.params)

    if cfg.order == "exhaustive":
        best = None
        for perm in itertools.permutations(range(cfg.env.n)):
            out = run(list(perm))
            if best is None or out.welfare < best[0].welfare:
                best = (out, list(perm))
        out, order = best
    else:
        order = order_values(values, cfg.order, rng)
        out = run(order)
    return TrialRecord(t, out.welfare, out.revenue, opt, rev_opt, list(out.winners),
                       order if cfg.order == "exhaustive" else None)


def _chunk(args):
    cfg, lo, hi = args
    binding = None if cfg.benchmark_only else resolve_algorithm(cfg.algorithm)[1]
    return [_trial(cfg, binding, t) for t in range(lo, hi)]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("LIMPROPHET_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentReport:
    records: list[TrialRecord]
    welfare: PairedRatio
    revenue: PairedRatio | None
    mean_revenue: float
    seed: int
    config: dict
    claimed_ratio: float | None
    wall_clock: float = 0.0

    @property
    def ratio(self) -> float:
        return self.welfare.ratio

    def body(self) -> dict:
        """Everything except wall-clock; identical across reruns with the same seed."""
        return {
            "config": self.config, "seed": self.seed, "trials": len(self.records),
            "mean_welfare": self.welfare.mean_alg, "mean_opt": self.welfare.mean_opt,
            "ratio": self.welfare.ratio, "ratio_se": self.welfare.stderr,
            "ci_half_width": self.welfare.ci_half_width, "claimed_ratio": self.claimed_ratio,
            "mean_revenue": self.mean_revenue,
            "revenue_ratio": None if self.revenue is None else self.revenue.ratio,
            "revenue_ratio_se": None if self.revenue is None else self.revenue.stderr,
            "mean_revenue_opt": None if self.revenue is None else self.revenue.mean_opt,
            "records": [asdict(r) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps({**self.body(), "wall_clock": self.wall_clock}, sort_keys=True, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "welfare", "revenue", "opt", "winners"])
        for r in self.records:
            w.writerow([r.trial, repr(r.welfare), repr(r.revenue), repr(r.opt), " ".join(map(str, r.winners))])
        return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    t0 = time.perf_counter()
    workers = worker_count() if workers is None else workers
    n = cfg.trials
    if workers <= 1 or n < 2 * workers:
        records = _chunk((cfg, 0, n))
    else:
        step = math.ceil(n / workers)
        jobs = [(cfg, lo, min(n, lo + step)) for lo in range(0, n, step)]
        with ProcessPoolExecutor(workers) as ex:
            records = [r for part in ex.map(_chunk, jobs) for r in part]
    welfare = paired_ratio([r.welfare for r in records], [r.opt for r in records])
    revenue = None
    if all(r.revenue_opt is not None for r in records):
        revenue = paired_ratio([r.revenue for r in records], [r.revenue_opt for r in records])
    claimed = None if cfg.benchmark_only else resolve_algorithm(cfg.algorithm)[1].ratio
    config = cfg.raw or {"env": cfg.env.to_dict(), "dist": cfg.dist.to_dict(), "algorithm": cfg.algorithm,
                         "order": cfg.order, "trials": cfg.trials, "seed": cfg.seed}
    return ExperimentReport(records, welfare, revenue, float(np.mean([r.revenue for r in records])), cfg.seed,
                            config, claimed, time.perf_counter() - t0)


def write_report(report: ExperimentReport, path: str) -> None:
    """``.csv`` gets per-trial rows; anything else gets the JSON report."""
    with open(path, "w") as fh:
        fh.write(report.to_csv() if path.endswith(".csv") else report.to_json())


# ---------------------------------------------------------------------------
# verification batteries


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def random_matroid(rng: np.random.Generator, n_max: int = 8) -> Environment:
    """A small random matroid of a random kind."""
    kind = int(rng.integers(5))
    n = int(rng.integers(3, n_max + 1))
    if kind == 0:
        return UniformMatroid(n, int(rng.integers(1, n + 1)))
    if kind == 1:
        return random_partition(n, int(rng.integers(1, n + 1)), rng)
    if kind == 2:
        return random_laminar(n, rng)
    if kind == 3:
        return random_graphic(int(rng.integers(2, 6)), n, rng)
    return random_transversal(n, int(rng.integers(1, 5)), 3, rng)


def check_walk_exact() -> list[CheckResult]:
    facts = walk.facts_exhaustive(10, (4, 9))
    refl = walk.reflection_exhaustive(16)
    deco = walk.decorrelation_exhaustive(8, 2)
    return [CheckResult("facts n<=10 k in {4,9}", facts.passed, f"{facts.checked} label rows"),
            CheckResult("reflection n<=16", refl.passed, f"{refl.checked} (n, m) pairs"),
            CheckResult("decorrelation/deletion n<=8", deco.passed, f"{deco.checked} layouts")]


def worst_order_instance(rng: np.random.Generator, n: int) -> tuple[bool, dict]:
    """Does revealing values in increasing order minimise the rehearsal take over all n! orders?"""
    k = int(rng.integers(1, n + 1))
    thr = rehearsal_thresholds(rng.random(n), k)
    vals = rng.random(n)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    takes = _kernels.rehearsal_order_welfare(thr, vals, perms)
    inc = float(_kernels.rehearsal_order_welfare(thr, vals, np.argsort(vals)[None, :].astype(np.int64))[0])
    return inc <= takes.min() + 1e-12, {"n": n, "k": k, "increasing": inc, "min": float(takes.min())}


def check_order_lemma(instances: int = 200, seed: int = 11) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    for i in range(instances):
        ok, info = worst_order_instance(rng, int(rng.integers(1, 8)))
        if not ok:
            return [CheckResult("increasing order is worst", False, json.dumps(info))]
    return [CheckResult("increasing order is worst", True, f"{instances} instances, n <= 7")]


def free_order_exact(env: Environment, values) -> tuple[dict[int, float], bool]:
    """Exact acceptance probability of each max-weight-basis element over all 2^n sample sets,
    plus whether every element with span cost strictly higher in S than in P - {y} was accepted."""
    n = env.n
    basis = greedy_basis(env, values)
    hits = dict.fromkeys(basis, 0)
    guarantee = True
    for mask in range(1 << n):
        S = [i for i in range(n) if (mask >> i) & 1]
        P = [i for i in range(n) if not (mask >> i) & 1]
        acc = set(free_order_run(env, S, values, values).accepted)
        for y in basis:
            if y in acc:
                hits[y] += 1
            elif y in P:
                if span_cost(env, y, S, values) > span_cost(env, y, [p for p in P if p != y], values):
                    guarantee = False
    return {y: c / (1 << n) for y, c in hits.items()}, guarantee


def check_secretary_exhaustive(instances: int = 12, seed: int = 5) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst, guarantee = 1.0, True
    for _ in range(instances):
        env = random_matroid(rng, 8)
        probs, ok = free_order_exact(env, rng.random(env.n))
        guarantee &= ok
        worst = min([worst, *probs.values()])
    return [CheckResult("free-order per-element >= 1/4 (exact)", worst >= 0.25, f"min {worst:.4f}"),
            CheckResult("free-order span-cost acceptance (exact)", guarantee, f"{instances} instances")]


MECH_ALGORITHMS = ("rank1", "partition", "graphic", "transversal", "general-iid", "matching", "uniform-k",
                   "free-order", "laminar-approx")


def random_pairing(kind: str, rng: np.random.Generator) -> Environment:
    from .env import BipartiteMatching, random_bipartite
    n = int(rng.integers(3, 8))
    if kind in ("rank1",):
        return UniformMatroid(n, 1)
    if kind == "uniform-k":
        return UniformMatroid(n, int(rng.integers(1, n + 1)))
    if kind == "partition":
        return random_partition(n, int(rng.integers(1, 4)), rng)
    if kind == "graphic":
        return random_graphic(4, n, rng)
    if kind == "transversal":
        return random_transversal(n, 3, 2, rng)
    if kind == "laminar-approx":
        return random_laminar(n, rng)
    if kind == "matching":
        return BipartiteMatching(random_bipartite(3, 3, 2, n, rng))
    return random_matroid(rng, 7)


def mechanism_case(rng: np.random.Generator) -> dict:
    """One random (algorithm, env, values, reserve policy) mechanism run and its invariant checks."""
    kind = MECH_ALGORITHMS[int(rng.integers(len(MECH_ALGORITHMS)))]
    binding = prophet_for(kind)
    env = random_pairing(kind, rng)
    dist = ProductDistribution.iid_of(Uniform(0.0, 1.0), env.n)
    values = dist.sample(rng)
    samples = dist.sample_many(rng, binding.samples_needed(env))
    order = [int(i) for i in rng.permutation(env.n)]
    seed = int(rng.integers(0, 2**63))
    pol_kind = ("none", "monopoly", "single-sample", "quantile")[int(rng.integers(4))]
    app = ("lazy", "eager")[int(rng.integers(2))]
    policy = ReservePolicy(pol_kind, app, 0.5 if pol_kind == "quantile" else None)

    def mech(vals, pol):
        return run_mechanism(binding, env, vals, samples, order, np.random.default_rng(seed), pol, dist)

    out = mech(values, policy)
    plain = mech(values, ReservePolicy("none", "lazy"))
    eager0 = mech(values, ReservePolicy("none", "eager"))
    res = {
        "kind": kind,
        "feasible": env.is_feasible(out.winners),
        "ir": out.check_ir(values),
        "revenue_identity": math.isclose(out.revenue, sum(out.payments.values()), abs_tol=1e-12),
        "zero_reserve_lazy_eager": plain.winners == eager0.winners and plain.payments == eager0.payments,
        "welfare_drop": policy.application == "eager" or out.welfare <= plain.welfare + 1e-12,
    }
    # unilateral deviation: truthful utility is never beaten
    i = int(rng.integers(env.n))
    dev = values.copy()
    dev[i] = float(rng.random() * 2)
    lie = mech(dev, policy)
    res["truthful"] = out.utility(i, values[i]) >= lie.utility(i, values[i]) - 1e-9
    # monotone: raising a winner's value keeps them winning
    if i in out.winners:
        up = values.copy()
        up[i] = values[i] + float(rng.random())
        res["monotone"] = i in mech(up, policy).winners
    else:
        res["monotone"] = True
    return res


def check_mech_ir(cases: int = 2000, seed: int = 3) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    fails: dict[str, int] = {}
    for _ in range(cases):
        res = mechanism_case(rng)
        for key, ok in res.items():
            if key != "kind" and not ok:
                fails[key] = fails.get(key, 0) + 1
    return [CheckResult(f"mechanism invariants x{cases}", not fails, json.dumps(fails) if fails else "")]


def ratio_setups(rng: np.random.Generator) -> dict[str, tuple[Environment, ProductDistribution]]:
    """Fixed instances for the empirical-vs-claimed table."""
    from .env import BipartiteMatching, random_bipartite
    u = lambda n: ProductDistribution.iid_of(Uniform(0.0, 1.0), n)
    graphic = random_graphic(6, 12, rng)
    trans = random_transversal(12, 6, 3, rng)
    matching = BipartiteMatching(random_bipartite(4, 4, 3, 10, rng))
    general = random_graphic(14, 30, rng)
    laminar = random_laminar(12, rng)
    return {"graphic": (graphic, u(graphic.n)), "transversal": (trans, u(trans.n)),
            "matching": (matching, u(matching.n)), "general-iid": (general, u(general.n)),
            "laminar-approx": (laminar, u(laminar.n))}


def ratio_table(trials: int = 2000, seed: int = 17, setups=None) -> list[dict]:
    setups = setups or ratio_setups(np.random.default_rng(seed))
    rows = []
    for kind, (env, dist) in setups.items():
        cfg = ExperimentConfig(env=env, dist=dist, algorithm=kind, order="random", trials=trials, seed=seed)
        rep = run_experiment(cfg)
        b = prophet_for(kind)
        rows.append({"kind": kind, "ratio": rep.ratio, "se": rep.welfare.stderr, "claimed": b.ratio,
                     "asserted": b.asserted,
                     "passed": (not b.asserted) or rep.ratio >= b.ratio - 3 * rep.welfare.stderr})
    return rows


def check_ratios(trials: int = 2000) -> list[CheckResult]:
    return [CheckResult(f"{r['kind']}: {r['ratio']:.4f} +- {r['se']:.4f} vs {r['claimed']:.4f}"
                        + ("" if r["asserted"] else " (reported)"), r["passed"]) for r in ratio_table(trials)]


SUITE_RUNNERS: dict[str, Callable[[], list[CheckResult]]] = {
    "walk-exact": check_walk_exact,
    "order-lemma": check_order_lemma,
    "secretary-exhaustive": check_secretary_exhaustive,
    "mech-ir": check_mech_ir,
    "ratios": check_ratios,
}


def verify(suite: str) -> list[CheckResult]:
    try:
        runner = SUITE_RUNNERS[suite]
    except KeyError:
        raise DomainError(f"unknown suite {suite!r}; known: {', '.join(SUITES)}") from None
    return runner()

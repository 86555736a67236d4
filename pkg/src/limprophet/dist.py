"""Value distributions, seeded streams and single-bidder revenue quantities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import DomainError, UnsupportedOperationError


class NotRegularError(ValueError):
    pass


@dataclass(frozen=True)
class RandomStream:
    """Deterministic stream keyed by ``(seed, stream)``.

    Every stream is a PCG64 generator seeded through ``SeedSequence([seed, stream])``,
    so trial ``t`` of an experiment with seed ``s`` always sees the same draws.
    """
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, self.stream])))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return RandomStream(seed, trial).generator()


class Marginal:
    family: str = "abstract"
    is_regular: bool = True
    is_mhr: bool = True

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def quantile(self, p: float) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def virtual_value(self, v):
        raise NotImplementedError

    def hazard(self, v):
        return self.pdf(v) / (1.0 - self.cdf(v))

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def monopoly_reserve(self) -> float:
        if not self.is_regular:
            raise NotRegularError(f"{self.family} is not regular")
        return self._reserve()

    def _reserve(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability {p} outside [0, 1]")


@dataclass(frozen=True)
class Uniform(Marginal):
    a: float = 0.0
    b: float = 1.0
    family = "uniform"

    def __post_init__(self):
        if not self.b > self.a:
            raise DomainError("uniform needs a < b")

    @property
    def support(self):
        return (self.a, self.b)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    def quantile(self, p):
        _check_p(p)
        return self.a + p * (self.b - self.a)

    def sample(self, rng, size=None):
        return rng.uniform(self.a, self.b, size)

    def virtual_value(self, v):
        return 2.0 * np.asarray(v, dtype=float) - self.b

    def _reserve(self):
        return max(self.a, self.b / 2.0)

    def to_dict(self):
        return {"family": self.family, "params": {"a": self.a, "b": self.b}}


@dataclass(frozen=True)
class Exponential(Marginal):
    rate: float = 1.0
    family = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("exponential needs rate > 0")

    @property
    def support(self):
        return (0.0, math.inf)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def hazard(self, v):
        return np.full_like(np.asarray(v, dtype=float), self.rate)

    def quantile(self, p):
        _check_p(p)
        return math.inf if p == 1.0 else -math.log1p(-p) / self.rate

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def virtual_value(self, v):
        return np.asarray(v, dtype=float) - 1.0 / self.rate

    def _reserve(self):
        return 1.0 / self.rate

    def to_dict(self):
        return {"family": self.family, "params": {"rate": self.rate}}


@dataclass(frozen=True)
class PointMass(Marginal):
    x: float = 1.0
    family = "point-mass"

    @property
    def support(self):
        return (self.x, self.x)

    def cdf(self, t):
        return np.where(np.asarray(t, dtype=float) >= self.x, 1.0, 0.0)

    def quantile(self, p):
        _check_p(p)
        return self.x

    def sample(self, rng, size=None):
        if size is None:
            return self.x
        return np.full(size, self.x, dtype=float)

    def virtual_value(self, v):
        # the revenue curve of an atom is linear in quantile with slope x
        return np.asarray(v, dtype=float) * 1.0

    def hazard(self, v):
        raise UnsupportedOperationError("point mass has no density")

    def _reserve(self):
        return self.x

    def to_dict(self):
        return {"family": self.family, "params": {"x": self.x}}


@dataclass(frozen=True)
class TruncatedEqualRevenue(Marginal):
    """F(v) = 1 - 1/v on [1, cap) with an atom of mass 1/cap at cap.

    Every posted price in [1, cap] earns revenue 1: regular but not MHR.
    """
    cap: float = 10.0
    family = "truncated-equal-revenue"
    is_mhr = False

    def __post_init__(self):
        if not self.cap > 1:
            raise DomainError("cap must exceed 1")

    @property
    def support(self):
        return (1.0, self.cap)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        inner = 1.0 - 1.0 / np.maximum(x, 1.0)
        return np.where(x < 1.0, 0.0, np.where(x >= self.cap, 1.0, inner))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 1.0) & (x < self.cap), 1.0 / np.maximum(x, 1.0) ** 2, 0.0)

    def quantile(self, p):
        _check_p(p)
        if p >= 1.0 - 1.0 / self.cap:
            return self.cap
        return 1.0 / (1.0 - p)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return np.minimum(1.0 / (1.0 - u), self.cap)

    def virtual_value(self, v):
        v = np.asarray(v, dtype=float)
        return np.where(v >= self.cap, self.cap, 0.0)

    def _reserve(self):
        return 1.0

    def to_dict(self):
        return {"family": self.family, "params": {"cap": self.cap}}


@dataclass(frozen=True)
class Empirical(Marginal):
    atoms: tuple[float, ...] = (1.0,)
    probs: tuple[float, ...] = (1.0,)
    family = "empirical"
    is_regular = False
    is_mhr = False

    def __post_init__(self):
        order = np.argsort(self.atoms, kind="stable")
        atoms = tuple(float(self.atoms[i]) for i in order)
        probs = tuple(float(self.probs[i]) for i in order)
        if len(atoms) != len(probs) or not atoms:
            raise DomainError("atoms and probs must be non-empty and aligned")
        if any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0, rel_tol=1e-9):
            raise DomainError("probs must be non-negative and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @property
    def support(self):
        return (self.atoms[0], self.atoms[-1])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(self.atoms, x, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def quantile(self, p):
        _check_p(p)
        cum = np.cumsum(self.probs)
        i = int(np.searchsorted(cum, p - 1e-12, side="left"))
        return self.atoms[min(i, len(self.atoms) - 1)]

    def sample(self, rng, size=None):
        return rng.choice(np.asarray(self.atoms), size=size, p=np.asarray(self.probs))

    def virtual_value(self, v):
        raise UnsupportedOperationError("virtual values of discrete distributions need ironing")

    def hazard(self, v):
        raise UnsupportedOperationError("empirical distribution has no density")

    def to_dict(self):
        return {"family": self.family, "params": {"atoms": list(self.atoms), "probs": list(self.probs)}}


def virtual_value(m: Marginal, v: float) -> float:
    return float(m.virtual_value(v))


def monopoly_reserve(m: Marginal) -> float:
    return m.monopoly_reserve()


def quantile(m: Marginal, p: float) -> float:
    return m.quantile(p)


@dataclass(frozen=True)
class ProductDistribution:
    marginals: tuple[Marginal, ...]
    iid: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        object.__setattr__(self, "iid", all(m == self.marginals[0] for m in self.marginals))

    @classmethod
    def iid_of(cls, m: Marginal, n: int) -> "ProductDistribution":
        return cls((m,) * n)

    @property
    def n(self) -> int:
        return len(self.marginals)

    @property
    def is_regular(self) -> bool:
        return all(m.is_regular for m in self.marginals)

    @property
    def is_mhr(self) -> bool:
        return all(m.is_mhr for m in self.marginals)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.iid:
            return np.asarray(self.marginals[0].sample(rng, self.n), dtype=float)
        return np.array([float(m.sample(rng)) for m in self.marginals])

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` independent profiles, shape ``(count, n)``."""
        if self.iid:
            return np.asarray(self.marginals[0].sample(rng, (count, self.n)), dtype=float)
        return np.column_stack([m.sample(rng, count) for m in self.marginals])

    def virtual_values(self, v) -> np.ndarray:
        return np.array([float(m.virtual_value(x)) for m, x in zip(self.marginals, v)])

    def to_dict(self) -> dict:
        if self.iid:
            return {**self.marginals[0].to_dict(), "n": self.n}
        return {"marginals": [m.to_dict() for m in self.marginals]}


def sample(dist: ProductDistribution, rng) -> np.ndarray:
    if isinstance(rng, RandomStream):
        rng = rng.generator()
    return dist.sample(rng)


_FAMILIES = {
    "uniform": Uniform,
    "exponential": Exponential,
    "point-mass": PointMass,
    "truncated-equal-revenue": TruncatedEqualRevenue,
}


def marginal_from_dict(d: dict) -> Marginal:
    family = d["family"]
    params = dict(d.get("params", {}))
    if family == "empirical":
        return Empirical(tuple(params["atoms"]), tuple(params["probs"]))
    try:
        return _FAMILIES[family](**params)
    except KeyError:
        raise DomainError(f"unknown distribution family {family!r}") from None


def dist_from_dict(d: dict, n: int | None = None) -> ProductDistribution:
    """Parse ``{family, params, n}`` or ``{marginals: [...]}``."""
    if "marginals" in d:
        ms = tuple(marginal_from_dict(m) for m in d["marginals"])
        if n is not None and len(ms) != n:
            raise DomainError(f"distribution has {len(ms)} marginals, environment has {n}")
        return ProductDistribution(ms)
    count = int(d.get("n", n if n is not None else 0))
    if n is not None and count != n:
        raise DomainError(f"distribution n={count} does not match environment n={n}")
    return ProductDistribution.iid_of(marginal_from_dict(d), count)

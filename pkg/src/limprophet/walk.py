"""Correlated-walk view of the rehearsal rule, and exact enumeration checks.

Draws are listed largest first.  Each draw is labelled ``SAMPLE`` (1) or
``VALUE`` (0); a label row of length L describes one coupled instance.
The walk moves down on values, up on samples that set a threshold, jumps
on the sample whose threshold is repeated, and stays flat afterwards.
Selection and loss of the increasing-order rehearsal run can be read off
the walk's left/right heights; ``walk_facts_check`` verifies this against
direct simulation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels

VALUE, SAMPLE = 0, 1
STEP_KINDS = ("down", "up", "jump", "flat")


@dataclass
class WalkTrace:
    positions: np.ndarray          # RW(0..L)
    kinds: list[str]
    k: int

    @property
    def jump_size(self) -> int:
        q = int(_kernels.jump_sample_index(self.k))
        return self.k - q + 1


def build_rw(labels: Sequence[int], k: int) -> WalkTrace:
    lab = np.asarray(labels, dtype=np.int8).reshape(1, -1)
    pos = _kernels.walk_positions(lab, k)[0]
    q = int(_kernels.jump_sample_index(k))
    kinds, c = [], 0
    for x in lab[0]:
        if x == VALUE:
            kinds.append("down")
        else:
            c += 1
            kinds.append("up" if c < q else "jump" if c == q else "flat")
    return WalkTrace(pos, kinds, k)


def heights(positions, j: int | None = None):
    """(H_L, H_R) at index ``j``, or arrays of both over every index if ``j`` is None."""
    p = np.asarray(positions)
    left = np.maximum.accumulate(p, axis=-1) - p
    right = np.flip(np.maximum.accumulate(np.flip(p, -1), axis=-1), -1) - p
    if j is None:
        return left, right
    return int(left[..., j]), int(right[..., j])


def heights_scan(positions, j: int) -> tuple[int, int]:
    """Quadratic reference for ``heights``."""
    p = list(positions)
    return max(p[i] - p[j] for i in range(j + 1)), max(p[i] - p[j] for i in range(j, len(p)))


# ---------------------------------------------------------------------------
# label spaces


def balanced_labels(n: int) -> np.ndarray:
    """Every length-2n row with exactly n samples (all pairings and orientations)."""
    rows = np.zeros((math.comb(2 * n, n), 2 * n), dtype=np.int8)
    for r, pos in enumerate(itertools.combinations(range(2 * n), n)):
        rows[r, list(pos)] = SAMPLE
    return rows


def oriented_labels(pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """All 2^n orientations of a fixed pairing of the 2n draw positions."""
    n = len(pairs)
    rows = np.zeros((1 << n, 2 * n), dtype=np.int8)
    for w in range(1 << n):
        for b, (a, c) in enumerate(pairs):
            rows[w, a if (w >> b) & 1 else c] = SAMPLE
    return rows


def all_labels(length: int) -> np.ndarray:
    """Every 0/1 row of the given length."""
    w = np.arange(1 << length)[:, None]
    return ((w >> np.arange(length)) & 1).astype(np.int8)


# ---------------------------------------------------------------------------
# height identities


@dataclass
class FactsReport:
    passed: bool
    checked: int
    counterexample: dict | None = None


def walk_facts_check(labels, k: int) -> FactsReport:
    """Compare the height description of the rehearsal run with direct simulation.

    Checks, for every row: a draw is selected iff it is a value whose right
    height is positive; and after every prefix of i draws the number of
    unselected values equals max(H_L - H_R, 0) at i.
    """
    lab = np.ascontiguousarray(np.atleast_2d(labels), dtype=np.int8)
    sel = _kernels.rehearsal_on_labels(lab, k).astype(bool)
    pos = _kernels.walk_positions(lab, k)
    hl, hr = heights(pos)
    is_value = lab == VALUE
    fact1 = is_value & (hr[:, 1:] > 0)
    missed = np.concatenate([np.zeros((lab.shape[0], 1), dtype=np.int64),
                             np.cumsum(is_value & ~sel, axis=1)], axis=1)
    fact2 = np.maximum(hl - hr, 0)
    bad1 = np.any(fact1 != sel, axis=1)
    bad2 = np.any(fact2 != missed, axis=1)
    bad = np.flatnonzero(bad1 | bad2)
    if bad.size == 0:
        return FactsReport(True, lab.shape[0])
    r = int(bad[0])
    return FactsReport(False, lab.shape[0], {
        "labels": lab[r].tolist(), "positions": pos[r].tolist(), "selected": sel[r].astype(int).tolist(),
        "fact1": bool(bad1[r]), "fact2": bool(bad2[r])})


def facts_exhaustive(max_n: int = 10, ks: Sequence[int] = (4, 9)) -> FactsReport:
    total = 0
    for k in ks:
        for n in range(1, max_n + 1):
            rep = walk_facts_check(balanced_labels(n), k)
            total += rep.checked
            if not rep.passed:
                rep.counterexample.update(n=n, k=k)
                return FactsReport(False, total, rep.counterexample)
    return FactsReport(True, total)


# ---------------------------------------------------------------------------
# prophet upper bound on the coupled instance


def _top_k_values_mask(lab: np.ndarray, k: int) -> np.ndarray:
    """Draws the prophet keeps: the first k values in the largest-first listing."""
    is_value = lab == VALUE
    return is_value & (np.cumsum(is_value, axis=1) <= k)


@dataclass
class BoundResult:
    lhs: object
    rhs: object
    exact: bool
    stderr: float = 0.0

    @property
    def holds(self) -> bool:
        if self.exact:
            return self.lhs <= self.rhs
        return float(self.lhs) <= float(self.rhs) + 3 * self.stderr


def prophet_two_sample_bound(Y, k: int, pairs=None, exact_cap: int = 12, trials: int = 20000,
                             rng: np.random.Generator | None = None) -> BoundResult:
    """Prophet's expected take vs half the top 2k draws.

    ``Y`` is the 2n draws sorted non-increasing.  ``pairs`` couples draw
    positions (default (0,1), (2,3), ...).  Exact rationals by enumerating
    all 2^n orientations when n <= ``exact_cap``; otherwise Monte-Carlo.
    """
    Y = list(Y)
    if any(a < b for a, b in zip(Y, Y[1:])):
        raise ValueError("Y must be sorted non-increasing")
    n = len(Y) // 2
    if pairs is None:
        pairs = [(2 * i, 2 * i + 1) for i in range(n)]
    yf = [Fraction(y) for y in Y]
    rhs = Fraction(1, 2) * sum(yf[:2 * k])
    if n <= exact_cap:
        lab = oriented_labels(pairs)
        counts = _top_k_values_mask(lab, k).sum(axis=0)
        lhs = sum(Fraction(int(c), lab.shape[0]) * y for c, y in zip(counts, yf))
        return BoundResult(lhs, rhs, True)
    rng = rng or np.random.default_rng(0)
    lab = np.zeros((trials, 2 * n), dtype=np.int8)
    flip = rng.random((trials, n)) < 0.5
    a = np.array([p[0] for p in pairs])
    c = np.array([p[1] for p in pairs])
    rows = np.arange(trials)[:, None]
    lab[rows, np.where(flip, a, c)] = SAMPLE
    take = (_top_k_values_mask(lab, k) * np.asarray(Y, dtype=float)).sum(axis=1)
    return BoundResult(float(take.mean()), float(rhs), False, float(take.std(ddof=1) / math.sqrt(trials)))


# ---------------------------------------------------------------------------
# independent +-1 walks


def reflection_identity(n: int, m: int) -> tuple[Fraction, Fraction]:
    """(Pr[height > 0 and end <= -m], Pr[end >= m + 2]) over all 2^n walks."""
    hit, total = _kernels.pm1_walk_histogram(n)
    ends = np.arange(-n, n + 1)
    a = int(hit[ends <= -m].sum())
    b = int(total[ends >= m + 2].sum())
    return Fraction(a, 1 << n), Fraction(b, 1 << n)


def _walk_space(n: int, pairs: Sequence[tuple[int, int]], removed=()):
    """All step vectors for ``n`` steps where each pair is anti-correlated.

    Free steps are independent +-1; paired steps take opposite signs; steps
    in ``removed`` are 0.  Every row is equally likely.
    """
    removed = set(removed)
    paired = {i for p in pairs for i in p}
    free = [i for i in range(n) if i not in paired and i not in removed]
    live_pairs = [p for p in pairs if p[0] not in removed]
    bits = len(free) + len(live_pairs)
    steps = np.zeros((1 << bits, n), dtype=np.int64)
    for w in range(1 << bits):
        for b, i in enumerate(free):
            steps[w, i] = 1 if (w >> b) & 1 else -1
        for b, (x, y) in enumerate(live_pairs, start=len(free)):
            sgn = 1 if (w >> b) & 1 else -1
            steps[w, x], steps[w, y] = sgn, -sgn
    return steps


def _heights_and_ends(steps: np.ndarray):
    pos = np.cumsum(steps, axis=1)
    top = np.maximum(pos.max(axis=1, initial=0), 0) if steps.shape[1] else np.zeros(steps.shape[0], dtype=np.int64)
    end = pos[:, -1] if steps.shape[1] else np.zeros(steps.shape[0], dtype=np.int64)
    return top, end


def expected_height(n: int, pairs: Sequence[tuple[int, int]], removed=()) -> Fraction:
    top, _ = _heights_and_ends(_walk_space(n, pairs, removed))
    return Fraction(int(top.sum()), top.shape[0])


@dataclass
class DecorrelationResult:
    correlated: Fraction
    decorrelated: Fraction

    @property
    def monotone(self) -> bool:
        return self.decorrelated >= self.correlated


def decorrelation_experiment(n: int, pairs: Sequence[tuple[int, int]], target: int = 0) -> DecorrelationResult:
    """Exact expected height before and after making pair ``target`` independent."""
    pairs = [tuple(sorted(p)) for p in pairs]
    rest = [p for i, p in enumerate(pairs) if i != target]
    return DecorrelationResult(expected_height(n, pairs), expected_height(n, rest))


@dataclass
class DeletionResult:
    kept: list[Fraction]        # Pr[height 0 and end <= -m], m = 0..n, pair kept
    deleted: list[Fraction]     # same with the earliest-ending pair removed
    pair: tuple[int, int]

    @property
    def monotone(self) -> bool:
        return all(d >= c for c, d in zip(self.kept, self.deleted))


def _zero_height_tail(steps: np.ndarray, n: int) -> list[Fraction]:
    top, end = _heights_and_ends(steps)
    N = steps.shape[0]
    return [Fraction(int(((top == 0) & (end <= -m)).sum()), N) for m in range(n + 1)]


def deletion_experiment(n: int, pairs: Sequence[tuple[int, int]]) -> DeletionResult:
    """Effect of removing the earliest-ending correlated pair on Pr[H = 0 and end <= -m]."""
    pairs = [tuple(sorted(p)) for p in pairs]
    first = min(pairs, key=lambda p: (p[1], p[0]))
    kept = _zero_height_tail(_walk_space(n, pairs), n)
    deleted = _zero_height_tail(_walk_space(n, pairs, removed=first), n)
    return DeletionResult(kept, deleted, first)


def pair_layouts(n: int, n_pairs: int):
    """Every way to place ``n_pairs`` disjoint index pairs among ``n`` steps."""
    def rec(avail, count, start):
        if count == 0:
            yield []
            return
        for a_i, a in enumerate(avail):
            if a < start:
                continue
            for b in avail[a_i + 1:]:
                rest = [x for x in avail if x not in (a, b)]
                for tail in rec(rest, count - 1, a + 1):
                    yield [(a, b)] + tail
    yield from rec(list(range(n)), n_pairs, 0)


@dataclass
class ExhaustiveResult:
    passed: bool
    checked: int
    counterexample: dict | None = None


def decorrelation_exhaustive(max_n: int = 8, max_pairs: int = 2) -> ExhaustiveResult:
    checked = 0
    for n in range(2, max_n + 1):
        for np_ in range(1, max_pairs + 1):
            for layout in pair_layouts(n, np_):
                for t in range(np_):
                    r = decorrelation_experiment(n, layout, t)
                    checked += 1
                    if not r.monotone:
                        return ExhaustiveResult(False, checked, {"n": n, "pairs": layout, "target": t,
                                                                 "correlated": str(r.correlated),
                                                                 "decorrelated": str(r.decorrelated)})
                d = deletion_experiment(n, layout)
                checked += 1
                if not d.monotone:
                    return ExhaustiveResult(False, checked, {"n": n, "pairs": layout, "deleted": d.pair})
    return ExhaustiveResult(True, checked)


def reflection_exhaustive(max_n: int = 16) -> ExhaustiveResult:
    checked = 0
    for n in range(0, max_n + 1):
        for m in range(0, n + 1):
            a, b = reflection_identity(n, m)
            checked += 1
            if a != b:
                return ExhaustiveResult(False, checked, {"n": n, "m": m, "lhs": str(a), "rhs": str(b)})
    return ExhaustiveResult(True, checked)


# ---------------------------------------------------------------------------
# diagnostics (reported, never asserted)


def rw_prime_positions(labels, k: int) -> np.ndarray:
    """Fixed-index jump variant: +-1 steps before the jump index, a floor(sqrt k) jump there, flat after."""
    lab = np.atleast_2d(labels)
    J = int(math.floor(2 * k - 4 * math.sqrt(k) + 2 * k ** (2 / 3)))
    steps = np.where(lab == SAMPLE, 1, -1).astype(np.int64)
    L = lab.shape[1]
    if J >= 1:
        if J <= L:
            steps[:, J - 1] = math.isqrt(k)
        steps[:, J:] = 0
    return np.concatenate([np.zeros((lab.shape[0], 1), dtype=np.int64), np.cumsum(steps, axis=1)], axis=1)


def random_balanced(count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform label rows with n samples among 2n draws (iid coupled instance)."""
    base = np.zeros(2 * n, dtype=np.int8)
    base[:n] = SAMPLE
    return np.ascontiguousarray(rng.permuted(np.tile(base, (count, 1)), axis=1))


def rw_prime_dominance(k: int, n: int, trials: int, rng: np.random.Generator) -> float:
    """Share of rows where the right height of the fixed-jump walk is at most the real one for all i <= k/2."""
    lab = random_balanced(trials, n, rng)
    _, hr = heights(_kernels.walk_positions(lab, k))
    _, hr2 = heights(rw_prime_positions(lab, k))
    lim = k // 2 + 1
    return float(np.mean(np.all(hr2[:, :lim] <= hr[:, :lim], axis=1)))


@dataclass
class ScalingRow:
    k: int
    i: int
    mean_loss: float
    stderr: float
    fitted_c: float


def scaling_report(ks=(64, 256), trials: int = 2000, rng: np.random.Generator | None = None,
                   couples_per_k: int = 4) -> list[ScalingRow]:
    """Monte-Carlo E[max(H_L - H_R, 0)] at i = k, and c = mean / (i / sqrt k)."""
    rng = rng or np.random.default_rng(0)
    rows = []
    for k in ks:
        lab = random_balanced(trials, couples_per_k * k, rng)
        hl, hr = heights(_kernels.walk_positions(lab, k))
        loss = np.maximum(hl[:, k] - hr[:, k], 0).astype(float)
        mean = float(loss.mean())
        rows.append(ScalingRow(k, k, mean, float(loss.std(ddof=1) / math.sqrt(trials)), mean / (k / math.sqrt(k))))
    return rows

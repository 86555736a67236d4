"""Inner loops that dominate runtime in the Monte-Carlo and exhaustive suites.

All functions take and return plain numpy arrays so they run unchanged
with or without numba (see ``_jit``).
"""
import numpy as np

from ._jit import njit

INF = np.inf


@njit
def _find(nxt, m):
    root = m
    while nxt[root] != root:
        root = nxt[root]
    while nxt[m] != root:
        nxt_m = nxt[m]
        nxt[m] = root
        m = nxt_m
    return root


@njit
def rehearsal_fill(thresholds, values, slot_out, price_out):
    """Run the slot rule on ``values`` (arrival order).

    ``thresholds`` must be non-increasing.  Writes the filled slot (or -1)
    and the posted price seen by each arrival; returns accepted weight.
    A value fills the lowest-index free slot whose threshold is strictly
    below it.  The posted price is the threshold of the last free slot.
    """
    k = thresholds.shape[0]
    nxt = np.arange(k + 1)          # nxt[m]: first free slot >= m (k = none)
    prv = np.arange(k + 1)          # root of prv[m+1], minus one: last free slot <= m
    total = 0.0
    for t in range(values.shape[0]):
        x = values[t]
        last = _find(prv, k) - 1
        price_out[t] = thresholds[last] if last >= 0 else INF
        lo = 0
        hi = k
        while lo < hi:
            mid = (lo + hi) // 2
            if thresholds[mid] >= x:
                lo = mid + 1
            else:
                hi = mid
        m = _find(nxt, lo)
        if m < k:
            slot_out[t] = m
            nxt[m] = m + 1
            prv[m + 1] = m
            total += x
        else:
            slot_out[t] = -1
    return total


@njit
def rehearsal_welfare_batch(thresholds, values):
    """Accepted weight per row; both arguments have one row per trial."""
    out = np.empty(values.shape[0])
    slots = np.empty(values.shape[1], dtype=np.int64)
    prices = np.empty(values.shape[1])
    for r in range(values.shape[0]):
        out[r] = rehearsal_fill(thresholds[r], values[r], slots, prices)
    return out


@njit
def rehearsal_order_welfare(thresholds, values, perms):
    """Accepted weight of ``values`` revealed in each row-order of ``perms``."""
    out = np.empty(perms.shape[0])
    n = values.shape[0]
    buf = np.empty(n)
    slots = np.empty(n, dtype=np.int64)
    prices = np.empty(n)
    for r in range(perms.shape[0]):
        for t in range(n):
            buf[t] = values[perms[r, t]]
        out[r] = rehearsal_fill(thresholds, buf, slots, prices)
    return out


@njit
def jump_sample_index(k):
    """1-based index of the sample whose threshold is repeated (q = max(1, k - floor(2 sqrt k)))."""
    r = 0
    while (r + 1) * (r + 1) <= 4 * k:
        r += 1
    q = k - r
    return q if q > 1 else 1


@njit
def rehearsal_on_labels(labels, k):
    """Direct simulation of the increasing-order rehearsal run on coupled draws.

    ``labels[r, j]`` is 1 if the j-th largest draw is a sample and 0 if it is
    a value.  Draw j carries the number ``L - j`` (distinct, decreasing).
    Samples become thresholds; values are revealed smallest first.
    Returns a 0/1 matrix marking selected values.
    """
    m, L = labels.shape
    q = jump_sample_index(k)
    sel = np.zeros((m, L), dtype=np.int8)
    thr = np.empty(k)
    vals = np.empty(L)
    pos = np.empty(L, dtype=np.int64)
    slots = np.empty(L, dtype=np.int64)
    prices = np.empty(L)
    for r in range(m):
        c = 0
        rep = INF
        for j in range(L):
            if labels[r, j] == 1:
                c += 1
                if c <= q and c <= k:
                    thr[c - 1] = L - j
                if c == q:
                    rep = L - j
        # with fewer than q samples only the first c slots have thresholds
        kk = k if c >= q else c
        for t in range(q - 1, kk):
            thr[t] = rep
        nv = 0
        for j in range(L - 1, -1, -1):
            if labels[r, j] == 0:
                vals[nv] = L - j
                pos[nv] = j
                nv += 1
        rehearsal_fill(thr[:kk], vals[:nv], slots[:nv], prices[:nv])
        for t in range(nv):
            if slots[t] >= 0:
                sel[r, pos[t]] = 1
    return sel


@njit
def walk_positions(labels, k):
    """Positions RW(0..L) of the correlated walk for each label row.

    value -> -1; samples before the jump sample -> +1; the jump sample ->
    +(k - q + 1) (one unit per slot sharing the repeated threshold);
    later samples -> 0.
    """
    m, L = labels.shape
    q = jump_sample_index(k)
    jump = k - q + 1
    out = np.zeros((m, L + 1), dtype=np.int64)
    for r in range(m):
        c = 0
        p = 0
        for j in range(L):
            if labels[r, j] == 0:
                p -= 1
            else:
                c += 1
                if c < q:
                    p += 1
                elif c == q:
                    p += jump
            out[r, j + 1] = p
    return out


@njit
def pm1_walk_histogram(n):
    """Enumerate all 2**n walks of independent +-1 steps.

    Returns ``(hit, total)``: for every end point ``e`` (offset by ``n``),
    the number of walks ending at ``e`` that reach height >= 1, and the
    number of all walks ending at ``e``.
    """
    hit = np.zeros(2 * n + 1, dtype=np.int64)
    total = np.zeros(2 * n + 1, dtype=np.int64)
    for w in range(1 << n):
        p = 0
        top = 0
        for s in range(n):
            if (w >> s) & 1:
                p += 1
            else:
                p -= 1
            if p > top:
                top = p
        total[p + n] += 1
        if top > 0:
            hit[p + n] += 1
    return hit, total

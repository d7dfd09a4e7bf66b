"""Pure-numpy kernels.

Same signatures and results as :mod:`sbmtest.kernels._numba`.  Histogram
kernels return integer counts, so both backends agree exactly; the power
iteration agrees to rounding.
"""

import numpy as np
from scipy import sparse

GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)

_BATCH = 1 << 17


def mix64(key, ctr):
    """SplitMix64 output for counter ``ctr`` under ``key`` (arrays, wrapping)."""
    z = np.asarray(ctr, dtype=np.uint64) + np.uint64(1)
    z = np.uint64(key) + z * GAMMA
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


def mc_histogram(eu, ev, n, key, lo, hi):
    """Histogram of (n_plus, e_in) over label draws ``lo <= j < hi``.

    Draw ``j`` uses words ``mix64(key, j * W + w)`` for ``w < W = ceil(n/64)``;
    bit ``u % 64`` of word ``u // 64`` is the label of node ``u`` (1 = plus).
    """
    n_edges = eu.shape[0]
    n_words = (n + 63) // 64
    rem = n - 64 * (n_words - 1)
    last_mask = np.uint64(0xFFFFFFFFFFFFFFFF) if rem == 64 else np.uint64((1 << rem) - 1)
    hist = np.zeros((n + 1) * (n_edges + 1), dtype=np.int64)
    eu_word, ev_word = eu // 64, ev // 64
    eu_bit, ev_bit = (eu % 64).astype(np.uint64), (ev % 64).astype(np.uint64)
    one = np.uint64(1)
    with np.errstate(over="ignore"):
        for start in range(lo, hi, _BATCH):
            stop = min(hi, start + _BATCH)
            j = np.arange(start, stop, dtype=np.uint64) * np.uint64(n_words)
            words = np.empty((n_words, stop - start), dtype=np.uint64)
            for w in range(n_words):
                words[w] = mix64(key, j + np.uint64(w))
            words[-1] &= last_mask
            n_plus = np.bitwise_count(words).sum(axis=0, dtype=np.int64)
            e_in = np.zeros(stop - start, dtype=np.int64)
            for e in range(n_edges):
                bu = (words[eu_word[e]] >> eu_bit[e]) & one
                bv = (words[ev_word[e]] >> ev_bit[e]) & one
                e_in += bu == bv
            hist += np.bincount(n_plus * (n_edges + 1) + e_in, minlength=hist.size)
    return hist.reshape(n + 1, n_edges + 1)


def enum_histogram(eu, ev, indptr, indices, k, lo, hi):
    """Histogram of (n_plus, e_in) over Gray-code indices ``lo <= t < hi``.

    Node 0 is pinned to plus; node ``i >= 1`` takes bit ``i - 1`` of
    ``t ^ (t >> 1)``.  The full range is ``[0, 2**(k-1))``.
    """
    n_edges = eu.shape[0]
    hist = np.zeros((k + 1) * (n_edges + 1), dtype=np.int64)
    for start in range(lo, hi, _BATCH):
        stop = min(hi, start + _BATCH)
        t = np.arange(start, stop, dtype=np.int64)
        g = t ^ (t >> 1)
        # shift by one so that node i sits at bit i, with node 0 forced to 1
        labels = (g << 1) | 1
        n_plus = np.bitwise_count(labels).astype(np.int64)
        e_in = np.zeros(stop - start, dtype=np.int64)
        for e in range(n_edges):
            e_in += ((labels >> eu[e]) & 1) == ((labels >> ev[e]) & 1)
        hist += np.bincount(n_plus * (n_edges + 1) + e_in, minlength=hist.size)
    return hist.reshape(k + 1, n_edges + 1)


def _adjacent(indptr, indices, x, y):
    lo, hi = indptr[x], indptr[x + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if indices[mid] < y:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[x + 1] and indices[lo] == y


def count_cycles_dfs(indptr, indices, n, m):
    """Count m-cycles by DFS rooted at each cycle's smallest vertex.

    A cycle ``r, x1, ..., x_{m-1}`` is counted only when ``r`` is its minimum
    and ``x1 < x_{m-1}``, which fixes rotation and orientation.  Neighbour
    lists must be sorted.
    """
    total = 0
    path = np.empty(m, dtype=np.int64)
    ptr = np.empty(m, dtype=np.int64)
    on_path = np.zeros(n, dtype=np.bool_)
    for r in range(n):
        path[0] = r
        ptr[0] = indptr[r]
        on_path[r] = True
        depth = 0
        while depth >= 0:
            x = path[depth]
            if ptr[depth] < indptr[x + 1]:
                w = indices[ptr[depth]]
                ptr[depth] += 1
                if w <= r or on_path[w]:
                    continue
                if depth + 2 == m:
                    if path[1] < w and _adjacent(indptr, indices, w, r):
                        total += 1
                    continue
                depth += 1
                path[depth] = w
                ptr[depth] = indptr[w]
                on_path[w] = True
            else:
                on_path[x] = False
                depth -= 1
    return total


def count_cycles(indptr, indices, n, m):
    if m == 3:
        adj = sparse.csr_matrix(
            (np.ones(indices.size, dtype=np.int64), indices, indptr), shape=(n, n)
        )
        return int((adj @ adj).multiply(adj).sum()) // 6
    return count_cycles_dfs(indptr, indices, n, m)


def gershgorin_shift(deg, n, p):
    return float(np.max(deg * (1.0 - p) + (n - 1 - deg) * p)) if n else 0.0


def power_iteration(eu, ev, n, p, x0, tol, maxiter):
    """Largest eigenvalue of ``A - p (J - I)`` by shifted power iteration.

    Returns ``(eigenvalue, iterations)``.  Stops once the Rayleigh quotient
    changes by less than ``tol`` and the residual norm is below ``tol``
    (both relative to ``max(1, |eigenvalue|)``).  The shift is the
    Gershgorin radius, so the shifted spectrum is non-negative and the
    dominant eigenvalue is the algebraically largest.
    """
    deg = np.bincount(eu, minlength=n) + np.bincount(ev, minlength=n)
    shift = gershgorin_shift(deg, n, p)
    x = x0 / np.linalg.norm(x0)
    theta_prev = np.inf
    it = 0
    theta = 0.0
    for it in range(1, maxiter + 1):
        y = np.bincount(eu, x[ev], minlength=n) + np.bincount(ev, x[eu], minlength=n)
        y -= p * (x.sum() - x)
        y += shift * x
        theta = float(x @ y)
        resid = float(np.linalg.norm(y - theta * x))
        x = y / np.linalg.norm(y)
        scale = max(1.0, abs(theta - shift))
        if abs(theta - theta_prev) <= tol * scale and resid <= tol * scale:
            break
        theta_prev = theta
    return theta - shift, it

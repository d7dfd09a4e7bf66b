"""Numba-compiled kernels; see :mod:`sbmtest.kernels._numpy` for the contracts."""

import numpy as np
from numba import njit

from . import _numpy

GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
M55 = np.uint64(0x5555555555555555)
M33 = np.uint64(0x3333333333333333)
M0F = np.uint64(0x0F0F0F0F0F0F0F0F)
H01 = np.uint64(0x0101010101010101)
ONE = np.uint64(1)
ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True, nogil=True)
def _mix64(key, ctr):
    z = key + (ctr + ONE) * GAMMA
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _popcount(x):
    x = x - ((x >> ONE) & M55)
    x = (x & M33) + ((x >> np.uint64(2)) & M33)
    x = (x + (x >> np.uint64(4))) & M0F
    return np.int64((x * H01) >> np.uint64(56))


@njit(cache=True, nogil=True)
def mc_histogram(eu, ev, n, key, lo, hi):
    n_edges = eu.shape[0]
    n_words = (n + 63) // 64
    rem = n - 64 * (n_words - 1)
    last_mask = ALL if rem == 64 else (ONE << np.uint64(rem)) - ONE
    hist = np.zeros((n + 1, n_edges + 1), dtype=np.int64)
    words = np.empty(n_words, dtype=np.uint64)
    key = np.uint64(key)
    nw = np.uint64(n_words)
    for j in range(lo, hi):
        base = np.uint64(j) * nw
        n_plus = 0
        for w in range(n_words):
            x = _mix64(key, base + np.uint64(w))
            if w == n_words - 1:
                x &= last_mask
            words[w] = x
            n_plus += _popcount(x)
        e_in = 0
        for e in range(n_edges):
            u = eu[e]
            v = ev[e]
            bu = (words[u >> 6] >> np.uint64(u & 63)) & ONE
            bv = (words[v >> 6] >> np.uint64(v & 63)) & ONE
            if bu == bv:
                e_in += 1
        hist[n_plus, e_in] += 1
    return hist


@njit(cache=True, nogil=True)
def enum_histogram(eu, ev, indptr, indices, k, lo, hi):
    n_edges = eu.shape[0]
    hist = np.zeros((k + 1, n_edges + 1), dtype=np.int64)
    if hi <= lo:
        return hist
    lab = np.zeros(k, dtype=np.int8)
    lab[0] = 1
    g = lo ^ (lo >> 1)
    n_plus = 1
    for i in range(1, k):
        lab[i] = (g >> (i - 1)) & 1
        n_plus += lab[i]
    e_in = 0
    for e in range(n_edges):
        if lab[eu[e]] == lab[ev[e]]:
            e_in += 1
    hist[n_plus, e_in] += 1
    for t in range(lo + 1, hi):
        # gray(t) differs from gray(t-1) in the lowest set bit of t
        b = 0
        while (t >> b) & 1 == 0:
            b += 1
        i = b + 1
        li = lab[i]
        for p in range(indptr[i], indptr[i + 1]):
            if lab[indices[p]] == li:
                e_in -= 1
            else:
                e_in += 1
        if li == 1:
            lab[i] = 0
            n_plus -= 1
        else:
            lab[i] = 1
            n_plus += 1
        hist[n_plus, e_in] += 1
    return hist


_adjacent = njit(cache=True, nogil=True)(_numpy._adjacent)


@njit(cache=True, nogil=True)
def count_cycles(indptr, indices, n, m):
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


@njit(cache=True, nogil=True)
def power_iteration(eu, ev, n, p, x0, tol, maxiter):
    deg = np.zeros(n, dtype=np.float64)
    for e in range(eu.shape[0]):
        deg[eu[e]] += 1.0
        deg[ev[e]] += 1.0
    shift = 0.0
    for i in range(n):
        r = deg[i] * (1.0 - p) + (n - 1 - deg[i]) * p
        if r > shift:
            shift = r
    x = x0 / np.sqrt(np.sum(x0 * x0))
    y = np.empty(n)
    theta_prev = np.inf
    theta = 0.0
    it = 0
    for it in range(1, maxiter + 1):
        s = 0.0
        for i in range(n):
            s += x[i]
        for i in range(n):
            y[i] = (shift + p) * x[i] - p * s
        for e in range(eu.shape[0]):
            y[eu[e]] += x[ev[e]]
            y[ev[e]] += x[eu[e]]
        theta = 0.0
        for i in range(n):
            theta += x[i] * y[i]
        resid = 0.0
        norm = 0.0
        for i in range(n):
            d = y[i] - theta * x[i]
            resid += d * d
            norm += y[i] * y[i]
        resid = np.sqrt(resid)
        norm = np.sqrt(norm)
        for i in range(n):
            x[i] = y[i] / norm
        scale = max(1.0, abs(theta - shift))
        if abs(theta - theta_prev) <= tol * scale and resid <= tol * scale:
            break
        theta_prev = theta
    return theta - shift, it

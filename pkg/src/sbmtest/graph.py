"""Sparse undirected graphs, the two random-graph models, cycle counts and I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataError, ParameterError, ParseError

MAX_CYCLE_LENGTH = 7


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    ``edges`` is an ``(E, 2)`` int64 array of pairs ``u < v`` sorted
    lexicographically with no duplicates; it is read-only.  Build instances
    with :meth:`from_edges` unless the array is already canonical.
    """

    n: int
    edges: np.ndarray

    def __post_init__(self):
        if self.n < 0:
            raise ParameterError(f"node count must be non-negative, got {self.n}")
        self.edges.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, pairs) -> "Graph":
        """Canonicalise ``pairs``: orient ``u < v``, sort, drop duplicates."""
        n = int(n)
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if arr.size:
            if arr.min() < 0 or arr.max() >= n:
                raise ParameterError(f"edge endpoint outside [0, {n})")
            if np.any(arr[:, 0] == arr[:, 1]):
                bad = arr[arr[:, 0] == arr[:, 1]][0]
                raise DataError(f"self-loop at node {bad[0]}")
            arr = np.sort(arr, axis=1)
            arr = np.unique(arr, axis=0)
        return cls(n, np.ascontiguousarray(arr, dtype=np.int64))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(int(n), np.zeros((0, 2), dtype=np.int64))

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        adj = np.asarray(adj)
        u, v = np.nonzero(np.triu(adj, 1))
        return cls(adj.shape[0], np.stack([u, v], axis=1).astype(np.int64))

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def eu(self) -> np.ndarray:
        return np.ascontiguousarray(self.edges[:, 0])

    @property
    def ev(self) -> np.ndarray:
        return np.ascontiguousarray(self.edges[:, 1])

    @cached_property
    def _csr(self):
        both = np.concatenate([self.edges, self.edges[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        counts = np.bincount(both[:, 0], minlength=self.n)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.ascontiguousarray(both[:, 1])
        indptr.setflags(write=False)
        indices.setflags(write=False)
        return indptr, indices

    @property
    def indptr(self) -> np.ndarray:
        return self._csr[0]

    @property
    def indices(self) -> np.ndarray:
        return self._csr[1]

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 matrix; for tests and small graphs only."""
        adj = np.zeros((self.n, self.n), dtype=np.int64)
        adj[self.edges[:, 0], self.edges[:, 1]] = 1
        return adj + adj.T

    def components(self) -> list[np.ndarray]:
        """Connected components as sorted node arrays, ordered by smallest node."""
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import connected_components

        data = np.ones(self.indices.size, dtype=np.int8)
        mat = csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))
        _, label = connected_components(mat, directed=False)
        order = np.argsort(label, kind="stable")
        splits = np.flatnonzero(np.diff(label[order])) + 1
        comps = np.split(order, splits) if self.n else []
        return sorted(comps, key=lambda c: c[0])

    def relabel(self, perm) -> "Graph":
        """Graph with node ``u`` renamed ``perm[u]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return Graph.from_edges(self.n, perm[self.edges])

    def to_text(self) -> str:
        """Byte-stable serialisation: ``n <count>`` then one ``u v`` per edge."""
        lines = [f"n {self.n}"]
        lines.extend(f"{u} {v}" for u, v in self.edges.tolist())
        return "\n".join(lines) + "\n"

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, num_edges={self.num_edges})"


@dataclass(frozen=True)
class CommunityLabels:
    """Node labels in {+1, -1}."""

    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.int8)
        if sigma.ndim != 1:
            raise ParameterError("labels must be a vector")
        if not np.all((sigma == 1) | (sigma == -1)):
            raise ParameterError("labels must be +1 or -1")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    def __len__(self):
        return self.sigma.size

    def check_graph(self, g: Graph):
        if len(self) != g.n:
            raise ParameterError(f"labels have length {len(self)} but graph has n={g.n}")

    @property
    def n_plus(self) -> int:
        return int(np.count_nonzero(self.sigma == 1))

    def flipped(self) -> "CommunityLabels":
        return CommunityLabels(-self.sigma)


@dataclass(frozen=True)
class ModelParams:
    """Rates ``a`` (within) and ``b`` (across) on ``n`` nodes.

    ``a >= b >= 0`` is accepted so the degenerate models (equal rates, zero
    across-rate) can be sampled; the test itself requires ``a > b > 0``.
    """

    a: float
    b: float
    n: int

    def __post_init__(self):
        a, b, n = float(self.a), float(self.b), int(self.n)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "n", n)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ParameterError("a and b must be finite")
        if n < 2:
            raise ParameterError(f"n must be at least 2, got {n}")
        if b < 0 or a < b:
            raise ParameterError(f"need a >= b >= 0, got a={a}, b={b}")
        if not 0.0 < self.p0 < 1.0:
            raise ParameterError(f"p0 = (a+b)/(2n) = {self.p0} outside (0, 1)")

    @property
    def p0(self) -> float:
        return (self.a + self.b) / (2.0 * self.n)

    @property
    def q0(self) -> float:
        return 1.0 - self.p0

    @property
    def p_in(self) -> float:
        return self.a / self.n

    @property
    def p_out(self) -> float:
        return self.b / self.n

    def require_strict(self):
        if not self.a > self.b > 0:
            raise ParameterError(f"need a > b > 0, got a={self.a}, b={self.b}")


def _pair_from_index(k: np.ndarray, n: int):
    """Map flat indices of the strict upper triangle (row-major) to (u, v)."""
    k = np.asarray(k, dtype=np.int64)
    # row u starts at u*n - u*(u+1)/2 - u; solve the quadratic then fix rounding
    u = np.floor((2 * n - 1 - np.sqrt((2.0 * n - 1) ** 2 - 8.0 * k)) / 2).astype(np.int64)
    start = u * (2 * n - u - 1) // 2
    low = k < start
    u[low] -= 1
    start = u * (2 * n - u - 1) // 2
    nxt = (u + 1) * (2 * n - u - 2) // 2
    high = k >= nxt
    u[high] += 1
    start = u * (2 * n - u - 1) // 2
    v = k - start + u + 1
    return u, v


def _bernoulli_subset(rng: np.random.Generator, total: int, p: float) -> np.ndarray:
    """Indices in ``[0, total)`` kept independently with probability ``p``."""
    if total == 0 or p <= 0.0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)
    count = int(rng.binomial(total, p))
    return np.sort(rng.choice(total, size=count, replace=False)).astype(np.int64)


def _er_edges(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    idx = _bernoulli_subset(rng, n * (n - 1) // 2, p)
    u, v = _pair_from_index(idx, n)
    return np.stack([u, v], axis=1)


def sample_er(params: ModelParams, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi graph: every pair is an edge independently w.p. ``p0``."""
    return Graph(params.n, _er_edges(params.n, params.p0, rng))


def sample_er_p(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi graph with an explicit edge probability (bootstrap nulls)."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"edge probability {p} outside [0, 1]")
    return Graph(int(n), _er_edges(int(n), p, rng))


def sample_sbm(params: ModelParams, rng: np.random.Generator) -> tuple[Graph, CommunityLabels]:
    """Two-community block model with i.i.d. uniform labels.

    Returns the graph and the labels used.  Same-label pairs are edges with
    probability ``a/n``, different-label pairs with ``b/n``.
    """
    n = params.n
    if params.p_in >= 1.0:
        raise ParameterError(f"a/n = {params.p_in} must be below 1")
    sigma = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    plus = np.flatnonzero(sigma == 1)
    minus = np.flatnonzero(sigma == -1)
    blocks = []
    for group in (plus, minus):
        k = group.size
        idx = _bernoulli_subset(rng, k * (k - 1) // 2, params.p_in)
        if idx.size:
            u, v = _pair_from_index(idx, k)
            blocks.append(np.stack([group[u], group[v]], axis=1))
    idx = _bernoulli_subset(rng, plus.size * minus.size, params.p_out)
    if idx.size:
        blocks.append(np.stack([plus[idx // minus.size], minus[idx % minus.size]], axis=1))
    pairs = np.concatenate(blocks) if blocks else np.zeros((0, 2), dtype=np.int64)
    return Graph.from_edges(n, pairs), CommunityLabels(sigma)


def count_cycles(g: Graph, m: int) -> int:
    """Number of distinct m-cycles (each vertex set with cyclic order counted once)."""
    if m < 3:
        raise ParameterError(f"cycle length must be at least 3, got {m}")
    if m > MAX_CYCLE_LENGTH:
        raise ParameterError(f"cycle length {m} above supported maximum {MAX_CYCLE_LENGTH}")
    if m > g.n:
        return 0
    return int(kernels.count_cycles(g.indptr, g.indices, g.n, m))


def read_edge_list(path, *, one_based: bool = False, comment: str = "#", n: int | None = None) -> Graph:
    """Parse a whitespace-separated ``u v`` file.

    An optional header ``n <count>`` (as written by :meth:`Graph.to_text`)
    fixes the node count; otherwise it is ``max index + 1`` unless ``n`` is
    given.  Duplicate and reversed edges collapse; self-loops raise
    :class:`DataError`.
    """
    text = Path(path).read_text()
    return parse_edge_list(text, one_based=one_based, comment=comment, n=n)


def parse_edge_list(text: str, *, one_based: bool = False, comment: str = "#", n: int | None = None) -> Graph:
    offset = 1 if one_based else 0
    header_n = None
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(comment, 1)[0].strip() if comment else raw.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "n" and len(parts) == 2 and not pairs and header_n is None:
            try:
                header_n = int(parts[1])
            except ValueError:
                raise ParseError(f"bad node count {parts[1]!r}", lineno) from None
            continue
        if len(parts) != 2:
            raise ParseError(f"expected 'u v', got {raw.strip()!r}", lineno)
        try:
            u, v = int(parts[0]) - offset, int(parts[1]) - offset
        except ValueError:
            raise ParseError(f"non-integer node in {raw.strip()!r}", lineno) from None
        if u < 0 or v < 0:
            raise ParseError(f"negative node index in {raw.strip()!r}", lineno)
        if u == v:
            raise DataError(f"line {lineno}: self-loop at node {u + offset}")
        pairs.append((u, v))
    max_node = max((max(p) for p in pairs), default=-1)
    count = n if n is not None else header_n if header_n is not None else max_node + 1
    if max_node >= count:
        raise DataError(f"node index {max_node} out of range for n={count}")
    return Graph.from_edges(count, pairs)


def write_edge_list(g: Graph, path):
    Path(path).write_text(g.to_text())


def induced_subgraph(g: Graph, nodes) -> Graph:
    """Subgraph on ``nodes``, relabelled ``0..k-1`` in the order given."""
    nodes = np.asarray(nodes, dtype=np.int64).ravel()
    if nodes.size and (nodes.min() < 0 or nodes.max() >= g.n):
        raise ParameterError(f"node outside [0, {g.n})")
    if np.unique(nodes).size != nodes.size:
        raise ParameterError("node subset contains duplicates")
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[nodes] = np.arange(nodes.size)
    mapped = new_id[g.edges]
    keep = (mapped >= 0).all(axis=1)
    return Graph.from_edges(nodes.size, mapped[keep])


def read_labels(path) -> CommunityLabels:
    """One label per line: ``+1``/``-1``/``+``/``-``, or ``node label`` pairs."""
    values = {}
    ordered = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        token = parts[-1]
        if token in ("+", "+1", "1"):
            lab = 1
        elif token in ("-", "-1"):
            lab = -1
        else:
            raise ParseError(f"bad label {token!r}", lineno)
        if len(parts) == 2:
            try:
                node = int(parts[0])
            except ValueError:
                raise ParseError(f"bad node id {parts[0]!r}", lineno) from None
            if node < 0 or node in values:
                raise ParseError(f"invalid or repeated node id {node}", lineno)
            values[node] = lab
        elif len(parts) == 1:
            ordered.append(lab)
        else:
            raise ParseError(f"expected 'label' or 'node label', got {raw.strip()!r}", lineno)
    if values and ordered:
        raise ParseError("mixed label formats")
    if values:
        n = max(values) + 1
        if sorted(values) != list(range(n)):
            raise DataError("labels missing for some nodes")
        ordered = [values[i] for i in range(n)]
    return CommunityLabels(np.array(ordered, dtype=np.int8))


def write_labels(labels: CommunityLabels, path):
    Path(path).write_text("".join(f"{int(s):+d}\n" for s in labels.sigma))

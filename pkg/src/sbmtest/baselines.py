"""Comparison tests calibrated by parametric bootstrap under the plug-in null.

Two statistics are provided: the top eigenvalue of the centred, scaled
adjacency operator, and a standardised triangle count.  Both are calibrated
by simulating ``G(n, p_hat)`` rather than through asymptotic quantiles,
which are unreliable at bounded degree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError, ParameterError
from .graph import Graph, count_cycles, sample_er_p

EIG_TOL = 1e-10
MIN_BOOTSTRAP = 200
KINDS = ("spectral", "subgraph")


def edge_density(g: Graph) -> float:
    if g.n < 2:
        return 0.0
    return 2.0 * g.num_edges / (g.n * (g.n - 1))


def _start_vector(n: int) -> np.ndarray:
    # fixed start so the statistic is a deterministic function of the graph
    return np.random.default_rng(0x5EED).standard_normal(n) + 1.0


def top_eigenvalue(g: Graph, p: float, tol: float = EIG_TOL, maxiter: int | None = None) -> float:
    """Largest eigenvalue of ``A - p (J - I)`` via matrix-free power iteration."""
    maxiter = 10_000 * g.n if maxiter is None else maxiter
    value, _ = kernels.power_iteration(g.eu, g.ev, g.n, float(p), _start_vector(g.n), tol, maxiter)
    return float(value)


def spectral_statistic(g: Graph) -> float:
    """Top eigenvalue of ``(A - p(J - I)) / sqrt((n-1) p (1-p))`` with ``p`` the edge density."""
    if g.n < 3:
        raise ParameterError(f"spectral statistic needs n >= 3, got {g.n}")
    p = edge_density(g)
    if not 0 < p < 1:
        raise DataError(f"edge density {p} is degenerate (empty or complete graph)")
    return top_eigenvalue(g, p) / math.sqrt((g.n - 1) * p * (1 - p))


def triangle_null_moments(n: int, p: float) -> tuple[float, float]:
    """Mean and SD of the triangle count in ``G(n, p)``."""
    triples = math.comb(n, 3)
    # pairs of triangles sharing exactly one edge
    shared = math.comb(n, 2) * math.comb(n - 2, 2)
    var = triples * (p**3 - p**6) + 2 * shared * (p**5 - p**6)
    return triples * p**3, math.sqrt(max(var, 0.0))


def subgraph_statistic(g: Graph) -> float:
    """Triangle count standardised by its ``G(n, p_hat)`` mean and SD."""
    if g.n < 3:
        raise ParameterError(f"subgraph statistic needs n >= 3, got {g.n}")
    mean, sd = triangle_null_moments(g.n, edge_density(g))
    t = count_cycles(g, 3)
    if sd == 0:
        return 0.0
    return (t - mean) / sd


_STATISTICS = {"spectral": spectral_statistic, "subgraph": subgraph_statistic}


@dataclass
class BaselineResult:
    kind: str
    statistic: float
    bootstrap_null_quantile: float
    alpha: float
    num_bootstrap: int
    decision: str
    seed: int | None = None

    @property
    def rejected(self) -> bool:
        return self.decision == "reject"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "statistic": self.statistic,
            "quantile": self.bootstrap_null_quantile,
            "alpha": self.alpha,
            "B": self.num_bootstrap,
            "decision": self.decision,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def bootstrap_null(kind: str, n: int, p: float, B: int, rng: np.random.Generator) -> np.ndarray:
    """Statistic values on ``B`` graphs drawn from ``G(n, p)``.

    Degenerate draws (no edges, or complete) get ``-inf`` so they never
    exceed an observed value.
    """
    stat = _STATISTICS[kind]
    out = np.empty(B)
    for i in range(B):
        h = sample_er_p(n, p, rng)
        try:
            out[i] = stat(h)
        except DataError:
            out[i] = -np.inf
    return out


def bootstrap_test(
    g: Graph,
    kind: str,
    alpha: float = 0.05,
    B: int = 500,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> BaselineResult:
    """Reject iff the observed statistic exceeds the bootstrap ``1 - alpha`` quantile.

    Supply either ``rng`` or ``seed`` (a stream is derived from the latter).
    """
    if kind not in _STATISTICS:
        raise ParameterError(f"unknown statistic kind {kind!r}; expected one of {KINDS}")
    if B < MIN_BOOTSTRAP:
        raise ParameterError(f"need at least {MIN_BOOTSTRAP} bootstrap draws, got {B}")
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if rng is None:
        if seed is None:
            raise ParameterError("bootstrap_test needs rng or seed")
        from .rng import stream

        rng = stream(seed, "bootstrap", kind)
    p = edge_density(g)
    if not 0 < p < 1:
        raise DataError(f"edge density {p} is degenerate (empty or complete graph)")
    observed = _STATISTICS[kind](g)
    null = np.sort(bootstrap_null(kind, g.n, p, B, rng))
    k = max(int(math.ceil((1 - alpha) * B - 1e-9)), 1)
    quantile = float(null[k - 1])
    return BaselineResult(
        kind=kind,
        statistic=float(observed),
        bootstrap_null_quantile=quantile,
        alpha=alpha,
        num_bootstrap=B,
        decision="reject" if observed > quantile else "retain",
        seed=seed,
    )

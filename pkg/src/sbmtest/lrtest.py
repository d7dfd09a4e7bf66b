"""Regularised likelihood-ratio statistic: exact enumeration and Monte Carlo.

Everything is in log space.  The per-configuration weight ``g(sigma)``
depends on ``sigma`` only through ``n_plus`` (number of +1 labels) and
``e_in`` (edges joining equal labels), so both the exact sum and the Monte
Carlo average reduce to an integer histogram over ``(n_plus, e_in)`` followed
by one log-sum-exp against a table of ``log g`` values.  Integer histograms
merge exactly, so results do not depend on chunking or thread count.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.signal import convolve2d
from scipy.special import gammaln, logsumexp

from . import kernels
from ._parallel import chunk_ranges, map_ordered
from .errors import CapacityError, DomainError, ParameterError
from .graph import CommunityLabels, Graph, ModelParams, induced_subgraph
from .rng import counter_key, stream

DEFAULT_EXACT_CAP = 26
DEFAULT_M_CAP = 10**9
MC_CHUNK = 1 << 20
ENUM_CHUNK = 1 << 22


class BudgetWarning(UserWarning):
    """The Monte Carlo sample budget was clipped at its cap."""


@dataclass(frozen=True)
class EpsilonConfig:
    """Regularisation ``epsilon`` together with the constants derived from it.

    The validity flags are reported, never enforced here:

    ``valid_epsilon``
        ``0 < epsilon < (a-b)/2`` and ``kappa_eps < 1`` (limit law exists).
    ``alt_limit_ok``
        ``(a-b)(a_eps-b_eps) < 2(a+b)/3`` (limit law under the alternative).
    ``mc_alt_ok``
        ``(a_eps-b_eps)(a-b) < a+b`` (Monte Carlo budget valid under the
        alternative).
    """

    a: float
    b: float
    epsilon: float

    @property
    def a_eps(self) -> float:
        return self.a - self.epsilon

    @property
    def b_eps(self) -> float:
        return self.b + self.epsilon

    @property
    def kappa(self) -> float:
        return (self.a - self.b) ** 2 / (2 * (self.a + self.b))

    @property
    def kappa_eps(self) -> float:
        return (self.a_eps - self.b_eps) ** 2 / (2 * (self.a + self.b))

    @property
    def kappa_tilde_eps(self) -> float:
        return (self.a - self.b) * (self.a_eps - self.b_eps) / (2 * (self.a + self.b))

    @property
    def valid_epsilon(self) -> bool:
        return 0 < self.epsilon < (self.a - self.b) / 2 and self.kappa_eps < 1

    @property
    def alt_limit_ok(self) -> bool:
        return (self.a - self.b) * (self.a_eps - self.b_eps) < 2 * (self.a + self.b) / 3

    @property
    def mc_alt_ok(self) -> bool:
        return (self.a_eps - self.b_eps) * (self.a - self.b) < self.a + self.b

    def violations(self) -> list[str]:
        names = []
        if not self.valid_epsilon:
            names.append("epsilon_range")
        if not self.alt_limit_ok:
            names.append("alternative_limit")
        if not self.mc_alt_ok:
            names.append("mc_alternative")
        return names

    def check_params(self, params: ModelParams):
        if params.a != self.a or params.b != self.b:
            raise ParameterError(
                f"config built for (a, b) = ({self.a}, {self.b}) used with "
                f"({params.a}, {params.b})"
            )


def make_epsilon_config(a: float, b: float, epsilon: float) -> EpsilonConfig:
    a, b, epsilon = float(a), float(b), float(epsilon)
    if not a > b > 0:
        raise ParameterError(f"need a > b > 0, got a={a}, b={b}")
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    return EpsilonConfig(a, b, epsilon)


@dataclass(frozen=True)
class StatisticValue:
    """A value of ``log Y``; ``se`` is the standard error of the log estimate."""

    log_value: float
    method: str
    M: int | None = None
    se: float | None = None


@dataclass
class TestResult:
    log_statistic: float
    critical_value_log: float
    alpha: float
    decision: str
    method: str
    M: int | None = None
    warnings: list[str] = field(default_factory=list)
    seed: int | None = None
    se: float | None = None

    __test__ = False  # not a pytest class

    @property
    def statistic(self) -> float:
        try:
            return math.exp(self.log_statistic)
        except OverflowError:
            return math.inf

    @property
    def critical_value(self) -> float:
        return math.exp(self.critical_value_log)

    @property
    def rejected(self) -> bool:
        return self.decision == "reject"

    def to_dict(self) -> dict:
        return {
            "log_statistic": self.log_statistic,
            "critical_value_log": self.critical_value_log,
            "alpha": self.alpha,
            "decision": self.decision,
            "method": self.method,
            "M": self.M,
            "warnings": list(self.warnings),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _log_rates(params: ModelParams, a_eff: float, b_eff: float):
    """Log-ratios for (edge within, edge across, non-edge within, non-edge across)."""
    n = params.n
    pin, pout = a_eff / n, b_eff / n
    if not (0 < pin < 1 and 0 < pout < 1):
        raise DomainError(
            f"regularised rates a_eps/n={pin}, b_eps/n={pout} must lie in (0, 1)"
        )
    log_p0, log_q0 = math.log(params.p0), math.log1p(-params.p0)
    return (
        math.log(pin) - log_p0,
        math.log(pout) - log_p0,
        math.log1p(-pin) - log_q0,
        math.log1p(-pout) - log_q0,
    )


def _table(params: ModelParams, n_edges: int, a_eff: float, b_eff: float) -> np.ndarray:
    l_in, l_out, l_nin, l_nout = _log_rates(params, a_eff, b_eff)
    n = params.n
    k = np.arange(n + 1, dtype=np.float64)[:, None]
    e_in = np.arange(n_edges + 1, dtype=np.float64)[None, :]
    pairs_in = k * (k - 1) / 2 + (n - k) * (n - k - 1) / 2
    pairs_out = k * (n - k)
    e_out = n_edges - e_in
    return (
        e_in * l_in
        + e_out * l_out
        + (pairs_in - e_in) * l_nin
        + (pairs_out - e_out) * l_nout
    )


def log_g_table(params: ModelParams, cfg: EpsilonConfig, n_edges: int) -> np.ndarray:
    """``log g`` for every ``(n_plus, e_in)``; shape ``(n+1, n_edges+1)``."""
    cfg.check_params(params)
    return _table(params, n_edges, cfg.a_eps, cfg.b_eps)


def label_counts(g: Graph, sigma: CommunityLabels) -> tuple[int, int]:
    """``(n_plus, e_in)`` for labels ``sigma`` on ``g``."""
    sigma.check_graph(g)
    s = sigma.sigma
    e_in = int(np.count_nonzero(s[g.edges[:, 0]] == s[g.edges[:, 1]]))
    return sigma.n_plus, e_in


def log_g(g: Graph, sigma: CommunityLabels, params: ModelParams, cfg: EpsilonConfig) -> float:
    """Log of the likelihood-ratio weight of one labelling, in O(edges + n)."""
    cfg.check_params(params)
    if params.n != g.n:
        raise ParameterError(f"params.n={params.n} but graph has n={g.n}")
    n_plus, e_in = label_counts(g, sigma)
    l_in, l_out, l_nin, l_nout = _log_rates(params, cfg.a_eps, cfg.b_eps)
    n = g.n
    pairs_in = n_plus * (n_plus - 1) // 2 + (n - n_plus) * (n - n_plus - 1) // 2
    pairs_out = n_plus * (n - n_plus)
    e_out = g.num_edges - e_in
    return (
        e_in * l_in
        + e_out * l_out
        + (pairs_in - e_in) * l_nin
        + (pairs_out - e_out) * l_nout
    )


def largest_component(g: Graph) -> int:
    return max((c.size for c in g.components()), default=0)


def _component_histogram(sub: Graph, threads: int) -> np.ndarray:
    k = sub.n
    eu, ev, indptr, indices = sub.eu, sub.ev, sub.indptr, sub.indices

    def run(span):
        return kernels.enum_histogram(eu, ev, indptr, indices, k, span[0], span[1])

    parts = map_ordered(run, chunk_ranges(0, 1 << (k - 1), ENUM_CHUNK), threads)
    half = np.sum(parts, axis=0)
    # labelling with node 0 = -1 is the global flip: n_plus -> k - n_plus
    return half + half[::-1, :]


def configuration_histogram(g: Graph, cap: int = DEFAULT_EXACT_CAP, threads: int = 1) -> np.ndarray:
    """Number of labellings in ``{+1,-1}^n`` at each ``(n_plus, e_in)``.

    Components are enumerated separately (Gray code over ``2^(k-1)``
    labellings with one node pinned) and combined by 2-d convolution, since
    both counts add across components.  Raises :class:`CapacityError` when a
    component has more than ``cap`` nodes.  Counts are float64, exact below
    ``2**53``.
    """
    comps = g.components()
    isolated = sum(1 for c in comps if c.size == 1)
    k = np.arange(isolated + 1)
    hist = np.exp(gammaln(isolated + 1) - gammaln(k + 1) - gammaln(isolated - k + 1))
    hist = np.round(hist)[:, None]
    for comp in comps:
        if comp.size == 1:
            continue
        if comp.size > cap:
            raise CapacityError(
                f"connected component of {comp.size} nodes exceeds the exact-enumeration "
                f"cap {cap}; use Monte Carlo"
            )
        sub = induced_subgraph(g, comp)
        hist = convolve2d(hist, _component_histogram(sub, threads).astype(np.float64))
    return hist


def _log_mean(hist: np.ndarray, table: np.ndarray, total_log: float) -> float:
    mask = hist > 0
    return float(logsumexp(np.log(hist[mask]) + table[mask]) - total_log)


def exact_Y(
    g: Graph,
    params: ModelParams,
    cfg: EpsilonConfig,
    cap: int = DEFAULT_EXACT_CAP,
    threads: int = 1,
) -> StatisticValue:
    """``log Y`` averaged over all ``2^n`` labellings.

    ``cap`` bounds the largest connected component rather than ``n``.
    """
    cfg.check_params(params)
    return _exact(g, params, cfg.a_eps, cfg.b_eps, cap, threads)


def exact_Y_classic(g: Graph, params: ModelParams, cap: int = DEFAULT_EXACT_CAP) -> StatisticValue:
    """Unregularised likelihood ratio (rates ``a/n`` and ``b/n``)."""
    return _exact(g, params, params.a, params.b, cap, 1)


def _exact(g, params, a_eff, b_eff, cap, threads):
    if params.n != g.n:
        raise ParameterError(f"params.n={params.n} but graph has n={g.n}")
    table = _table(params, g.num_edges, a_eff, b_eff)
    hist = configuration_histogram(g, cap, threads)
    return StatisticValue(_log_mean(hist, table, g.n * math.log(2.0)), "exact")


def mc_histogram(g: Graph, M: int, key, threads: int = 1) -> np.ndarray:
    """Integer ``(n_plus, e_in)`` histogram of ``M`` counter-based label draws."""
    eu, ev = g.eu, g.ev

    def run(span):
        return kernels.mc_histogram(eu, ev, g.n, key, span[0], span[1])

    parts = map_ordered(run, chunk_ranges(0, M, MC_CHUNK), threads)
    return np.sum(parts, axis=0)


def mc_Y(
    g: Graph,
    params: ModelParams,
    cfg: EpsilonConfig,
    M: int,
    rng: np.random.Generator,
    threads: int = 1,
) -> StatisticValue:
    """Monte Carlo ``log Y`` from ``M`` uniform labellings.

    Returns the log of the sample mean of ``g`` and the delta-method
    standard error ``sd(g) / (sqrt(M) * mean(g))`` of that log.
    """
    cfg.check_params(params)
    if params.n != g.n:
        raise ParameterError(f"params.n={params.n} but graph has n={g.n}")
    M = int(M)
    if M < 1:
        raise ParameterError(f"M must be at least 1, got {M}")
    table = _table(params, g.num_edges, cfg.a_eps, cfg.b_eps)
    hist = mc_histogram(g, M, counter_key(rng), threads).astype(np.float64)
    log_m = math.log(M)
    m1 = _log_mean(hist, table, log_m)
    m2 = _log_mean(hist, 2 * table, log_m)
    rel_var = max(math.expm1(min(m2 - 2 * m1, 700.0)), 0.0)
    return StatisticValue(m1, "monte-carlo", M, math.sqrt(rel_var / M))


def budget_formula(n: int, cfg: EpsilonConfig) -> float:
    """Uncapped sample budget ``100 n^3 exp(n kappa_eps / 2)``."""
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    return 100.0 * n**3 * math.exp(n * cfg.kappa_eps / 2)


def default_M(n: int, cfg: EpsilonConfig, cap: int = DEFAULT_M_CAP) -> int:
    """Monte Carlo budget ``ceil(100 n^3 exp(n kappa_eps / 2))``, clipped at ``cap``.

    Clipping emits :class:`BudgetWarning`.
    """
    if not cfg.valid_epsilon:
        raise ParameterError("sample budget needs 0 < epsilon < (a-b)/2 and kappa_eps < 1")
    budget = budget_formula(n, cfg)
    if budget > cap:
        warnings.warn(
            f"sample budget {budget:.4g} for n={n} clipped to cap {cap}", BudgetWarning, stacklevel=2
        )
        return int(cap)
    return int(math.ceil(budget))


CriticalSource = Union[float, Callable[[ModelParams, EpsilonConfig, float], float]]


def _resolve_critical(source, params, cfg, alpha) -> float:
    if callable(source):
        source = source(params, cfg, alpha)
    if hasattr(source, "w_log"):
        source = source.w_log
    return float(source)


def run_test(
    g: Graph,
    params: ModelParams,
    cfg: EpsilonConfig,
    alpha: float,
    critical_value: CriticalSource,
    *,
    seed: int | None = None,
    exact_cap: int = DEFAULT_EXACT_CAP,
    M: int | None = None,
    M_cap: int = DEFAULT_M_CAP,
    threads: int = 1,
) -> TestResult:
    """Compute the statistic and compare it with ``log w_alpha``.

    ``critical_value`` is a log critical value, an object with ``w_log``, or
    a callable ``(params, cfg, alpha)`` returning either.  Exact enumeration
    is used whenever every component fits ``exact_cap`` and no explicit
    ``M`` is given; otherwise Monte Carlo with ``M`` draws driven by
    ``seed`` (default ``100 n^3 exp(n kappa_eps / 2)``, clipped at
    ``M_cap``).  Ties reject.
    """
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    cfg.check_params(params)
    w_log = _resolve_critical(critical_value, params, cfg, alpha)
    if M is None and largest_component(g) <= exact_cap:
        value = exact_Y(g, params, cfg, exact_cap, threads)
    else:
        if seed is None:
            raise ParameterError("Monte Carlo evaluation requires a seed")
        if M is None:
            M = default_M(g.n, cfg, M_cap)
        value = mc_Y(g, params, cfg, M, stream(seed, "mc"), threads)
    decision = "reject" if value.log_value >= w_log else "retain"
    return TestResult(
        log_statistic=value.log_value,
        critical_value_log=w_log,
        alpha=alpha,
        decision=decision,
        method=value.method,
        M=value.M,
        warnings=cfg.violations(),
        seed=seed,
        se=value.se,
    )

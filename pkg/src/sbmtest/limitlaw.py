"""Power-Poisson limit laws of the statistic, critical values and limit power.

``log W = sum_{m>=3} X_m`` with independent
``X_m = Z_m log(1 + d_m) - lam_m d_m``, ``Z_m ~ Poisson(mu_m)``, where
``lam_m = ((a+b)/2)^m / (2m)``, ``d_m = ((a_eps-b_eps)/(a+b))^m`` and
``mu_m = lam_m`` under the null or ``lam_m (1 + ((a-b)/(a+b))^m)`` under the
alternative.  Each term is kept whole: the pieces ``lam_m d_m`` alone need
not be summable.  Terms are stored as ``step_m (Z_m - mu_m) + drift_m`` with
``drift_m = E X_m`` evaluated in log space, which stays accurate when
``mu_m`` is astronomically large and ``d_m`` is tiny.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import binom, norm

from ._parallel import map_ordered
from .errors import DivergenceError, ParameterError
from .lrtest import EpsilonConfig
from .rng import child_streams

DEFAULT_TOLERANCE = 1e-8
DEFAULT_NORMAL_THRESHOLD = 1e6
DEFAULT_NUM_SAMPLES = 10**6
MIN_NUM_SAMPLES = 10**4
SAMPLE_BLOCK = 1 << 16
MAX_TERMS = 200_000


def _log1pmx_over_sq(d: np.ndarray) -> np.ndarray:
    """``(log(1+d) - d) / d**2``, stable near zero (limit -1/2)."""
    d = np.asarray(d, dtype=np.float64)
    out = np.empty_like(d)
    small = np.abs(d) < 1e-3
    ds = d[small]
    out[small] = -0.5 + ds * (1 / 3 + ds * (-1 / 4 + ds * (1 / 5 + ds * (-1 / 6))))
    dl = d[~small]
    out[~small] = (np.log1p(dl) - dl) / dl**2
    return out


def _log1p_over(d: np.ndarray) -> np.ndarray:
    """``log(1+d) / d`` (limit 1)."""
    d = np.asarray(d, dtype=np.float64)
    out = np.ones_like(d)
    nz = d != 0
    out[nz] = np.log1p(d[nz]) / d[nz]
    return out


@dataclass(frozen=True, eq=False)
class LimitLawSpec:
    """Truncated description of a limit law; arrays are indexed by ``m = 3..K``."""

    hypothesis: str
    a: float
    b: float
    epsilon: float
    tolerance: float
    normal_approx_threshold: float
    m: np.ndarray
    lam: np.ndarray
    delta: np.ndarray
    delta_eps: np.ndarray
    poisson_mean: np.ndarray
    step: np.ndarray
    drift: np.ndarray
    variance: np.ndarray
    tail_mean: float
    tail_variance: float

    @property
    def K(self) -> int:
        return int(self.m[-1])

    @property
    def key(self) -> tuple:
        return (self.a, self.b, self.epsilon)

    @property
    def mean_log(self) -> float:
        return float(self.drift.sum())

    @property
    def var_log(self) -> float:
        return float(self.variance.sum())


def _term_arrays(cfg: EpsilonConfig, hypothesis: str, m: np.ndarray):
    """Per-term (log lam, log|d|, sign d, step, drift, variance, log mu)."""
    s = cfg.a + cfg.b
    r_eps = (cfg.a_eps - cfg.b_eps) / s
    r = (cfg.a - cfg.b) / s
    log_lam = m * math.log(s / 2) - np.log(2.0 * m)
    log_abs_d = m * math.log(abs(r_eps))
    sign_d = np.where((r_eps < 0) & (m % 2 == 1), -1.0, 1.0)
    with np.errstate(under="ignore"):
        d = sign_d * np.exp(log_abs_d)
    q1 = _log1p_over(d)
    h = _log1pmx_over_sq(d)
    step = d * q1
    # lam * d^2 * h  (the whole null drift)
    null_drift = -np.exp(log_lam + 2 * log_abs_d + np.log(-h))
    if hypothesis == "null":
        log_mu = log_lam
        drift = null_drift
    else:
        log_delta = m * math.log(r)
        log_mu = log_lam + np.log1p(np.exp(log_delta))
        # lam * delta * log(1+d) + lam * d^2 * h
        drift = sign_d * np.exp(log_lam + log_delta + log_abs_d + np.log(q1)) + null_drift
    variance = np.exp(log_mu + 2 * log_abs_d + 2 * np.log(q1))
    return log_lam, log_abs_d, sign_d, step, drift, variance, log_mu


def build_law(
    cfg: EpsilonConfig,
    hypothesis: str = "null",
    tolerance: float = DEFAULT_TOLERANCE,
    normal_approx_threshold: float = DEFAULT_NORMAL_THRESHOLD,
) -> LimitLawSpec:
    """Truncate the infinite product at the smallest ``K`` whose tail is negligible.

    ``K`` is minimal such that both ``sum_{m>K} |E X_m|`` and
    ``sum_{m>K} Var X_m`` are below ``tolerance``.  Requires
    ``kappa_eps < 1`` (and ``kappa_tilde_eps < 1`` for the alternative),
    otherwise the series diverge.
    """
    if hypothesis not in ("null", "alternative"):
        raise ParameterError(f"hypothesis must be 'null' or 'alternative', got {hypothesis!r}")
    if not tolerance > 0:
        raise ParameterError("tolerance must be positive")
    if cfg.a_eps == cfg.b_eps:
        raise ParameterError("a_eps == b_eps makes the limit law degenerate")
    if cfg.kappa_eps >= 1:
        raise DivergenceError(f"kappa_eps = {cfg.kappa_eps:.6g} >= 1: limit law does not exist")
    rho = cfg.kappa_eps
    if hypothesis == "alternative":
        if abs(cfg.kappa_tilde_eps) >= 1:
            raise DivergenceError(
                f"kappa_tilde_eps = {cfg.kappa_tilde_eps:.6g} >= 1: alternative law diverges"
            )
        rho = max(rho, abs(cfg.kappa_tilde_eps))
    # terms are O(rho^m / m); go far enough that the unseen remainder is far below tolerance
    m_max = int(math.ceil(math.log(tolerance * 1e-4 * (1 - rho)) / math.log(rho))) + 4
    m_max = min(max(m_max, 4), MAX_TERMS)
    m_all = np.arange(3, m_max + 1, dtype=np.float64)
    log_lam, log_abs_d, _, step, drift, variance, log_mu = _term_arrays(cfg, hypothesis, m_all)
    tail_mean = np.cumsum(np.abs(drift)[::-1])[::-1]
    tail_var = np.cumsum(variance[::-1])[::-1]
    # tails[i] covers m >= m_all[i]; K is the last m kept
    ok = np.flatnonzero((tail_mean < tolerance) & (tail_var < tolerance))
    cut = int(ok[0]) if ok.size else m_all.size
    cut = max(cut, 1)
    keep = slice(0, cut)
    m = m_all[keep].astype(np.int64)
    s = cfg.a + cfg.b
    lam = np.exp(log_lam[keep])
    delta = ((cfg.a - cfg.b) / s) ** m.astype(np.float64)
    delta_eps = ((cfg.a_eps - cfg.b_eps) / s) ** m.astype(np.float64)
    return LimitLawSpec(
        hypothesis=hypothesis,
        a=cfg.a,
        b=cfg.b,
        epsilon=cfg.epsilon,
        tolerance=tolerance,
        normal_approx_threshold=normal_approx_threshold,
        m=m,
        lam=lam,
        delta=delta,
        delta_eps=delta_eps,
        poisson_mean=np.exp(log_mu[keep]),
        step=step[keep],
        drift=drift[keep],
        variance=variance[keep],
        tail_mean=float(tail_mean[cut]) if cut < m_all.size else 0.0,
        tail_variance=float(tail_var[cut]) if cut < m_all.size else 0.0,
    )


def sample_log_W(spec: LimitLawSpec, rng: np.random.Generator, size: int | None = None):
    """Draw ``log W`` from the truncated law.

    ``Z_m`` is Poisson when its mean is at most ``normal_approx_threshold``
    and Gaussian with matched moments above it.
    """
    shape = 1 if size is None else int(size)
    total = np.zeros(shape)
    for mu, step, drift, var in zip(spec.poisson_mean, spec.step, spec.drift, spec.variance):
        if mu <= spec.normal_approx_threshold:
            z = rng.poisson(mu, shape)
            total += step * (z - mu) + drift
        else:
            total += math.sqrt(var) * rng.standard_normal(shape) + drift
    return float(total[0]) if size is None else total


def sample_many(spec: LimitLawSpec, num_samples: int, rng: np.random.Generator, threads: int = 1) -> np.ndarray:
    """``num_samples`` draws in fixed blocks with their own sub-streams.

    Output depends only on ``rng`` and ``num_samples``, never on ``threads``.
    """
    num_samples = int(num_samples)
    blocks = [min(SAMPLE_BLOCK, num_samples - s) for s in range(0, num_samples, SAMPLE_BLOCK)]
    streams = child_streams(rng, len(blocks))
    parts = map_ordered(lambda job: sample_log_W(spec, job[0], job[1]), zip(streams, blocks), threads)
    return np.concatenate(parts) if parts else np.zeros(0)


def empirical_quantile(sorted_values: np.ndarray, level: float) -> float:
    """Smallest sample value with empirical CDF at least ``level``."""
    n = sorted_values.size
    k = max(int(math.ceil(level * n - 1e-9)), 1)
    return float(sorted_values[k - 1])


def bootstrap_quantile_halfwidth(sorted_values: np.ndarray, level: float, coverage: float = 0.95) -> float:
    """Half-width of the bootstrap percentile interval for the ``level`` quantile.

    Uses the exact bootstrap law of the empirical quantile: it is at most
    the ``j``-th order statistic iff ``Binomial(N, j/N) >= ceil(level N)``.
    """
    n = sorted_values.size
    k = max(int(math.ceil(level * n - 1e-9)), 1)
    j = np.arange(1, n + 1)
    cdf = binom.sf(k - 1, n, j / n)
    tail = (1 - coverage) / 2
    j_lo = int(np.searchsorted(cdf, tail))
    j_hi = min(int(np.searchsorted(cdf, 1 - tail)), n - 1)
    return 0.5 * float(sorted_values[j_hi] - sorted_values[j_lo])


@dataclass(frozen=True)
class CriticalValue:
    w_log: float
    half_width: float
    alpha: float
    num_samples: int

    @property
    def w(self) -> float:
        return math.exp(self.w_log)


def critical_value(
    spec_null: LimitLawSpec,
    alpha: float,
    num_samples: int = DEFAULT_NUM_SAMPLES,
    rng: np.random.Generator | None = None,
    threads: int = 1,
) -> CriticalValue:
    """Empirical ``1 - alpha`` quantile of ``log W`` under the null law."""
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if num_samples < MIN_NUM_SAMPLES:
        raise ParameterError(f"num_samples must be at least {MIN_NUM_SAMPLES}, got {num_samples}")
    if spec_null.hypothesis != "null":
        raise ParameterError("critical values need the null law")
    if rng is None:
        raise ParameterError("critical_value needs a random stream")
    x = np.sort(sample_many(spec_null, num_samples, rng, threads))
    return CriticalValue(
        w_log=empirical_quantile(x, 1 - alpha),
        half_width=bootstrap_quantile_halfwidth(x, 1 - alpha),
        alpha=alpha,
        num_samples=int(num_samples),
    )


def simulated_power(
    spec_null: LimitLawSpec,
    spec_alt: LimitLawSpec,
    alpha: float,
    num_samples: int = DEFAULT_NUM_SAMPLES,
    rng: np.random.Generator | None = None,
    threads: int = 1,
) -> float:
    """``P(W_alt >= w_alpha)`` with both laws simulated on independent sub-streams."""
    if spec_null.key != spec_alt.key:
        raise ParameterError(f"laws built for different (a, b, eps): {spec_null.key} vs {spec_alt.key}")
    if rng is None:
        raise ParameterError("simulated_power needs a random stream")
    null_rng, alt_rng = child_streams(rng, 2)
    w = critical_value(spec_null, alpha, num_samples, null_rng, threads).w_log
    draws = sample_many(spec_alt, num_samples, alt_rng, threads)
    return float(np.mean(draws >= w))


def sigma_sq(k: float) -> float:
    """``sum_{m>=3} k^m / (2m) = -(log(1-k) + k + k^2/2) / 2``."""
    return -0.5 * (math.log1p(-k) + k + 0.5 * k * k)


@dataclass(frozen=True)
class PowerLimitInputs:
    k1: float
    k2: float
    alpha: float

    def __post_init__(self):
        if not (0 < self.k1 < 1 and 0 < self.k2 < 1):
            raise ParameterError(f"k1, k2 must lie in (0, 1), got {self.k1}, {self.k2}")
        if not 0 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")

    @classmethod
    def from_config(cls, cfg: EpsilonConfig, alpha: float) -> "PowerLimitInputs":
        return cls(cfg.kappa_eps, cfg.kappa_tilde_eps, alpha)


def limit_power(inputs: PowerLimitInputs) -> float:
    """Large-degree limit of the power: ``Phi(s2^2 / s1 - z_{1-alpha})``."""
    s1 = math.sqrt(sigma_sq(inputs.k1))
    s2sq = sigma_sq(inputs.k2)
    return float(norm.cdf(s2sq / s1 - norm.ppf(1 - inputs.alpha)))


def null_second_moment(cfg: EpsilonConfig) -> float:
    """``E W_0^2 = exp(sigma^2(kappa_eps))``."""
    return math.exp(sigma_sq(cfg.kappa_eps))


def alternative_mean(cfg: EpsilonConfig) -> float:
    """``E W_1 = exp(sigma^2(kappa_tilde_eps))``."""
    return math.exp(sigma_sq(cfg.kappa_tilde_eps))


def default_cache_path() -> Path:
    root = os.environ.get("SBMTEST_CACHE_DIR")
    base = Path(root) if root else Path.home() / ".cache" / "sbmtest"
    return base / "critical_values.jsonl"


class CriticalValueCache:
    """JSON-lines store of critical values keyed by the inputs that determine them.

    ``path=None`` keeps records in memory only.
    """

    FIELDS = ("a", "b", "epsilon", "alpha", "tolerance", "seed", "num_samples")

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._records: dict[tuple, dict] = {}
        if self.path is not None and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self._records[self._key(rec)] = rec

    @classmethod
    def _key(cls, rec: dict) -> tuple:
        return tuple(float(rec[f]) if f not in ("seed", "num_samples") else int(rec[f]) for f in cls.FIELDS)

    def __len__(self):
        return len(self._records)

    def lookup(self, **key) -> CriticalValue | None:
        rec = self._records.get(self._key(key))
        if rec is None:
            return None
        return CriticalValue(rec["w_log"], rec["half_width"], rec["alpha"], rec["num_samples"])

    def store(self, record: dict):
        self._records[self._key(record)] = record
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def get(
        self,
        cfg: EpsilonConfig,
        alpha: float,
        seed: int,
        *,
        tolerance: float = DEFAULT_TOLERANCE,
        num_samples: int = DEFAULT_NUM_SAMPLES,
        threads: int = 1,
    ) -> CriticalValue:
        """Cached critical value, computing and storing it on a miss."""
        from .rng import stream

        key = dict(
            a=cfg.a, b=cfg.b, epsilon=cfg.epsilon, alpha=alpha,
            tolerance=tolerance, seed=seed, num_samples=num_samples,
        )
        hit = self.lookup(**key)
        if hit is not None:
            return hit
        spec = build_law(cfg, "null", tolerance)
        rng = stream(seed, "critical-value", cfg.a, cfg.b, cfg.epsilon, alpha)
        cv = critical_value(spec, alpha, num_samples, rng, threads)
        self.store({**key, "w_log": cv.w_log, "half_width": cv.half_width})
        return cv

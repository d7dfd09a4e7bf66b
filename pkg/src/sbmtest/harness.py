"""Size/power experiments, rate estimation and the subnetwork-combination protocol."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from ._parallel import map_ordered
from .baselines import bootstrap_test
from .errors import CapacityError, ParameterError
from .graph import CommunityLabels, Graph, ModelParams, induced_subgraph, sample_er, sample_sbm
from .limitlaw import DEFAULT_NUM_SAMPLES, DEFAULT_TOLERANCE, CriticalValueCache
from .lrtest import (
    DEFAULT_EXACT_CAP,
    DEFAULT_M_CAP,
    EpsilonConfig,
    exact_Y,
    largest_component,
    make_epsilon_config,
    mc_Y,
    budget_formula,
)
from .rng import child_streams, stream

METHODS = ("epsilon-lr", "spectral", "subgraph")
M_POLICIES = ("default-budget", "explicit", "exact-when-feasible")
CSV_HEADER = ["method", "c", "epsilon", "kappa", "n", "replicates", "power", "size", "seed", "runtime_s"]
# rough cost of one g-evaluation, used only for runtime estimates
SECONDS_PER_EVAL = {"numba": 2e-8, "numpy": 1.5e-7}
EXPENSIVE_SECONDS = 3600.0


@dataclass(frozen=True)
class GridPoint:
    """One cell: either ``c`` (with ``a = center + c``, ``b = center - c``) or explicit ``a, b``."""

    n: int
    c: float | None = None
    epsilon: float | None = None
    a: float | None = None
    b: float | None = None

    def rates(self, center: float) -> tuple[float, float]:
        if self.a is not None and self.b is not None:
            return float(self.a), float(self.b)
        if self.c is None:
            raise ParameterError("grid point needs c or explicit a and b")
        return center + self.c, center - self.c

    def label(self, center: float) -> str:
        a, b = self.rates(center)
        return f"(a={a:g}, b={b:g}, epsilon={self.epsilon}, n={self.n})"


@dataclass
class ExperimentConfig:
    grid: list[GridPoint]
    method: str = "epsilon-lr"
    center: float = 2.5
    replicates: int = 200
    alpha: float = 0.05
    master_seed: int = 0
    M_policy: str = "exact-when-feasible"
    M: int | None = None
    M_cap: int = DEFAULT_M_CAP
    exact_cap: int = DEFAULT_EXACT_CAP
    num_null_samples: int = DEFAULT_NUM_SAMPLES
    tolerance: float = DEFAULT_TOLERANCE
    bootstrap: int = 200
    threads: int = 1
    cache_path: str | None = None
    record_runtime: bool = True

    def __post_init__(self):
        self.grid = [p if isinstance(p, GridPoint) else GridPoint(**p) for p in self.grid]
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.M_policy not in M_POLICIES:
            raise ParameterError(f"M_policy must be one of {M_POLICIES}, got {self.M_policy!r}")
        if self.replicates < 1:
            raise ParameterError("replicates must be at least 1")
        if self.M_policy == "explicit" and (self.M is None or self.M < 1):
            raise ParameterError("explicit M_policy needs a positive M")
        if not self.grid:
            raise ParameterError("empty grid")
        for point in self.grid:
            a, b = point.rates(self.center)
            ModelParams(a, b, point.n).require_strict()
            if self.method == "epsilon-lr":
                if point.epsilon is None:
                    raise ParameterError(f"grid point {point} needs epsilon for the epsilon-lr method")
                make_epsilon_config(a, b, point.epsilon)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["grid"] = [{k: v for k, v in asdict(p).items() if v is not None} for p in self.grid]
        return data


@dataclass
class SimulationTable:
    rows: list[dict] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(row[k]) for k in CSV_HEADER])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.rows, sort_keys=True)

    def cell(self, **match) -> dict:
        for row in self.rows:
            if all(row[k] == v for k, v in match.items()):
                return row
        raise KeyError(match)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(round(value, 10))
    return str(value)


def _evaluations(point: GridPoint, config: ExperimentConfig, cfg: EpsilonConfig | None) -> float:
    if config.method != "epsilon-lr":
        return float(config.bootstrap) * point.n
    if config.M_policy == "explicit":
        return float(config.M)
    if config.M_policy == "exact-when-feasible" and point.n <= config.exact_cap:
        return 2.0 ** (point.n - 1)
    return budget_formula(point.n, cfg)


def estimate_cost(config: ExperimentConfig) -> list[dict]:
    """Per-cell rough runtime estimate (two hypotheses x replicates)."""
    rate = SECONDS_PER_EVAL.get(kernels.BACKEND, 1e-7)
    out = []
    for point in config.grid:
        a, b = point.rates(config.center)
        cfg = make_epsilon_config(a, b, point.epsilon) if config.method == "epsilon-lr" else None
        evals = _evaluations(point, config, cfg)
        seconds = 2 * config.replicates * evals * rate
        out.append({
            "cell": point.label(config.center),
            "evaluations_per_replicate": evals,
            "seconds": seconds,
            "expensive": seconds > EXPENSIVE_SECONDS,
        })
    return out


def _budget(n: int, cfg: EpsilonConfig, cap: int, where: str) -> int:
    budget = budget_formula(n, cfg)
    if budget > cap:
        raise CapacityError(f"cell {where}: sample budget {budget:.4g} exceeds cap {cap}")
    return int(math.ceil(budget))


def epsilon_lr_log_statistic(
    g: Graph,
    params: ModelParams,
    cfg: EpsilonConfig,
    rng: np.random.Generator,
    *,
    M_policy: str = "exact-when-feasible",
    M: int | None = None,
    M_cap: int = DEFAULT_M_CAP,
    exact_cap: int = DEFAULT_EXACT_CAP,
    where: str = "",
) -> float:
    """``log Y`` for one graph under the chosen evaluation policy."""
    if M_policy == "exact-when-feasible" and largest_component(g) <= exact_cap:
        return exact_Y(g, params, cfg, exact_cap).log_value
    if M_policy == "explicit":
        budget = int(M)
    else:
        budget = _budget(g.n, cfg, M_cap, where)
    return mc_Y(g, params, cfg, budget, rng).log_value


def _replicate(point, config, a, b, cfg, w_log, r):
    params = ModelParams(a, b, point.n)
    tags = (config.method, a, b, point.epsilon if point.epsilon is not None else -1.0, point.n, r)
    g0 = sample_er(params, stream(config.master_seed, "cell", *tags, "null-graph"))
    g1, _ = sample_sbm(params, stream(config.master_seed, "cell", *tags, "alt-graph"))
    out = []
    for g, hyp in ((g0, "null"), (g1, "alt")):
        rng = stream(config.master_seed, "cell", *tags, hyp + "-test")
        if config.method == "epsilon-lr":
            value = epsilon_lr_log_statistic(
                g, params, cfg, rng,
                M_policy=config.M_policy, M=config.M, M_cap=config.M_cap,
                exact_cap=config.exact_cap, where=point.label(config.center),
            )
            out.append(value >= w_log)
        else:
            out.append(bootstrap_test(g, config.method, config.alpha, config.bootstrap, rng=rng).rejected)
    return out


def run_experiment(config: ExperimentConfig, progress=None) -> SimulationTable:
    """Rejection fractions under both hypotheses for every grid cell.

    ``size`` uses Erdos-Renyi draws, ``power`` block-model draws.  Every
    replicate owns streams derived from ``(master_seed, cell, replicate)``,
    critical values are computed once per ``(a, b, epsilon, alpha)``, and
    the table is a deterministic function of the config (up to the runtime
    column, which is blank when ``record_runtime`` is off).
    """
    cache = CriticalValueCache(config.cache_path)
    table = SimulationTable()
    for point in config.grid:
        start = time.perf_counter()
        a, b = point.rates(config.center)
        cfg = None
        w_log = None
        if config.method == "epsilon-lr":
            cfg = make_epsilon_config(a, b, point.epsilon)
            if config.M_policy == "default-budget":
                _budget(point.n, cfg, config.M_cap, point.label(config.center))
            w_log = cache.get(
                cfg, config.alpha, config.master_seed,
                tolerance=config.tolerance, num_samples=config.num_null_samples,
                threads=config.threads,
            ).w_log
        results = map_ordered(
            lambda r: _replicate(point, config, a, b, cfg, w_log, r),
            range(config.replicates),
            config.threads,
        )
        size = sum(r[0] for r in results) / config.replicates
        power = sum(r[1] for r in results) / config.replicates
        kappa = (a - b) ** 2 / (2 * (a + b))
        row = {
            "method": config.method,
            "c": (a - b) / 2,
            "epsilon": point.epsilon,
            "kappa": kappa,
            "n": point.n,
            "replicates": config.replicates,
            "power": power,
            "size": size,
            "seed": config.master_seed,
            "runtime_s": round(time.perf_counter() - start, 3) if config.record_runtime else None,
        }
        table.rows.append(row)
        if progress is not None:
            progress(row)
    return table


def mle_ab(g: Graph, labels: CommunityLabels) -> tuple[float, float]:
    """Binomial MLE of ``(a, b)`` given labels: ``n E_in / P_in`` and ``n E_out / P_out``."""
    labels.check_graph(g)
    n = g.n
    n_plus = labels.n_plus
    pairs_in = n_plus * (n_plus - 1) // 2 + (n - n_plus) * (n - n_plus - 1) // 2
    pairs_out = n_plus * (n - n_plus)
    if pairs_in == 0 or pairs_out == 0:
        raise ParameterError("labels are degenerate: need within- and across-label pairs")
    s = labels.sigma
    e_in = int(np.count_nonzero(s[g.edges[:, 0]] == s[g.edges[:, 1]]))
    e_out = g.num_edges - e_in
    return n * e_in / pairs_in, n * e_out / pairs_out


def combination_protocol(
    g: Graph,
    communities,
    regime: tuple[int, int],
    sample_size: int,
    repeats: int,
    method: str,
    alpha: float,
    rng: np.random.Generator,
    *,
    a: float | None = None,
    b: float | None = None,
    epsilon: float | None = None,
    M: int | None = None,
    exact_cap: int = DEFAULT_EXACT_CAP,
    num_null_samples: int = DEFAULT_NUM_SAMPLES,
    bootstrap: int = 200,
    threads: int = 1,
) -> float:
    """Rejection proportion over repeated two-community subsamples.

    Each repeat draws ``sample_size`` nodes without replacement from each
    community of ``regime`` (``2 * sample_size`` from one community when
    both ids coincide), takes the induced subgraph and runs ``method``.  The
    epsilon-LR test needs ``a``, ``b``, ``epsilon`` for the subgraph size;
    it is evaluated exactly when feasible, otherwise by Monte Carlo with
    ``M`` draws.
    """
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
    if repeats < 1:
        raise ParameterError("repeats must be at least 1")
    comms = [np.asarray(c, dtype=np.int64) for c in communities]
    seen = np.concatenate(comms) if comms else np.zeros(0, dtype=np.int64)
    if seen.size and (seen.min() < 0 or seen.max() >= g.n):
        raise ParameterError("community node outside the graph")
    if np.unique(seen).size != seen.size:
        raise ParameterError("communities must be disjoint")
    i, j = regime
    if not (0 <= i < len(comms) and 0 <= j < len(comms)):
        raise ParameterError(f"regime {regime} refers to unknown communities")
    need = {i: sample_size, j: sample_size} if i != j else {i: 2 * sample_size}
    for cid, k in need.items():
        if k > comms[cid].size:
            raise ParameterError(f"community {cid} has {comms[cid].size} nodes, need {k}")
    k_sub = 2 * sample_size

    cfg = params = None
    w_log = None
    if method == "epsilon-lr":
        if a is None or b is None or epsilon is None:
            raise ParameterError("epsilon-lr needs a, b and epsilon")
        params = ModelParams(a, b, k_sub)
        cfg = make_epsilon_config(a, b, epsilon)
        seed = int(rng.integers(0, 2**31))
        w_log = CriticalValueCache().get(
            cfg, alpha, seed, num_samples=num_null_samples, threads=threads
        ).w_log

    def one(child: np.random.Generator) -> bool:
        picks = [child.choice(comms[cid], size=k, replace=False) for cid, k in need.items()]
        sub = induced_subgraph(g, np.sort(np.concatenate(picks)))
        if method == "epsilon-lr":
            policy = "explicit" if M is not None else "exact-when-feasible"
            value = epsilon_lr_log_statistic(
                sub, params, cfg, child, M_policy=policy, M=M, exact_cap=exact_cap,
            )
            return value >= w_log
        return bootstrap_test(sub, method, alpha, bootstrap, rng=child).rejected

    outcomes = map_ordered(one, child_streams(rng, repeats), threads)
    return sum(outcomes) / repeats

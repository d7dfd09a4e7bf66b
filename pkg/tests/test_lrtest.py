import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from sbmtest.errors import CapacityError, DomainError, ParameterError
from sbmtest.graph import CommunityLabels, Graph, ModelParams, sample_er, sample_sbm
from sbmtest.lrtest import (
    BudgetWarning,
    configuration_histogram,
    default_M,
    exact_Y,
    exact_Y_classic,
    log_g,
    make_epsilon_config,
    mc_Y,
    budget_formula,
    run_test,
)
from sbmtest.rng import stream

from conftest import random_graph


def product_log_g(g, sigma, n, a_eps, b_eps, a, b):
    """Pair-by-pair product form of the weight (independent of the count formula)."""
    p0 = (a + b) / (2 * n)
    adj = g.adjacency()
    total = 0.0
    for u, v in itertools.combinations(range(n), 2):
        p = (a_eps if sigma[u] == sigma[v] else b_eps) / n
        total += math.log(p / p0) if adj[u, v] else math.log((1 - p) / (1 - p0))
    return total


def brute_log_Y(g, params, cfg):
    n = g.n
    logs = [
        product_log_g(g, s, n, cfg.a_eps, cfg.b_eps, params.a, params.b)
        for s in itertools.product((1, -1), repeat=n)
    ]
    return logsumexp(logs) - n * math.log(2)


def test_config_constants():
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    assert cfg.a_eps == pytest.approx(3.5) and cfg.b_eps == pytest.approx(1.5)
    assert cfg.kappa == pytest.approx(1.764)
    assert cfg.kappa_eps == pytest.approx(0.4)
    assert cfg.kappa_tilde_eps == pytest.approx(0.84)
    assert cfg.valid_epsilon
    assert cfg.violations() == ["alternative_limit", "mc_alternative"]


def test_config_rejects_bad_rates():
    with pytest.raises(ParameterError):
        make_epsilon_config(1.0, 2.0, 0.1)
    with pytest.raises(ParameterError):
        make_epsilon_config(4.0, 1.0, 0.0)


def test_invalid_epsilon_is_flagged_not_fatal():
    cfg = make_epsilon_config(4.6, 0.4, 0.1)
    assert not cfg.valid_epsilon
    assert "epsilon_range" in cfg.violations()


@pytest.mark.parametrize("seed", range(5))
def test_log_g_matches_product_form(seed):
    n = 9
    g = random_graph(n, 0.4, seed)
    params = ModelParams(4.6, 0.4, n)
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    sigma = np.where(np.random.default_rng(seed).random(n) < 0.5, 1, -1).astype(np.int8)
    expected = product_log_g(g, sigma, n, 3.5, 1.5, 4.6, 0.4)
    assert log_g(g, CommunityLabels(sigma), params, cfg) == pytest.approx(expected, abs=1e-12)


def test_log_g_flip_symmetry():
    g = random_graph(10, 0.3, 1)
    params = ModelParams(4.0, 1.0, 10)
    cfg = make_epsilon_config(4.0, 1.0, 0.8)
    lab = CommunityLabels(np.array([1, -1] * 5, dtype=np.int8))
    assert log_g(g, lab, params, cfg) == pytest.approx(log_g(g, lab.flipped(), params, cfg))


def test_log_g_domain_error():
    g = random_graph(3, 0.5, 0)
    params = ModelParams(4.0, 1.0, 3)
    cfg = make_epsilon_config(4.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        log_g(g, CommunityLabels(np.ones(3, dtype=np.int8)), params, cfg)


@pytest.mark.parametrize("seed", range(6))
def test_exact_matches_brute_force(seed):
    n = 9
    g = random_graph(n, 0.3, seed)
    params = ModelParams(4.6, 0.4, n)
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    assert exact_Y(g, params, cfg).log_value == pytest.approx(brute_log_Y(g, params, cfg), abs=1e-12)


def test_histogram_counts_every_labelling():
    g = random_graph(15, 0.12, 8)
    hist = configuration_histogram(g)
    assert hist.sum() == 2**15
    # n_plus marginal is binomial regardless of the edges
    marg = hist.sum(axis=1)
    assert np.array_equal(marg, [math.comb(15, k) for k in range(16)])


def test_component_cap():
    g = Graph.from_edges(12, [(i, i + 1) for i in range(11)])
    with pytest.raises(CapacityError):
        configuration_histogram(g, cap=10)
    # isolated nodes and small components never hit the cap
    h = Graph.from_edges(40, [(0, 1), (2, 3)])
    assert configuration_histogram(h, cap=4).sum() == 2.0**40


def test_empty_graph_statistic():
    g = Graph.empty(8)
    params = ModelParams(4.6, 0.4, 8)
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    assert exact_Y(g, params, cfg).log_value == pytest.approx(brute_log_Y(g, params, cfg), abs=1e-12)


@pytest.mark.parametrize("n", [4, 5])
def test_null_expectation_identity(n):
    # E_0 Y = 1 by summing over every graph on n nodes
    params = ModelParams(4.6, 0.4, n)
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    pairs = list(itertools.combinations(range(n), 2))
    total = 0.0
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        k = len(edges)
        prob = params.p0**k * (1 - params.p0) ** (len(pairs) - k)
        total += prob * math.exp(exact_Y(Graph.from_edges(n, edges), params, cfg).log_value)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_classic_statistic_uses_unregularised_rates():
    g = random_graph(8, 0.3, 2)
    params = ModelParams(4.6, 0.4, 8)
    cfg = make_epsilon_config(4.6, 0.4, 1e-12)
    assert exact_Y_classic(g, params).log_value == pytest.approx(exact_Y(g, params, cfg).log_value, abs=1e-9)


def test_mc_converges_to_exact():
    params = ModelParams(4.6, 0.4, 16)
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    g, _ = sample_sbm(params, stream(3))
    exact = exact_Y(g, params, cfg).log_value
    est = mc_Y(g, params, cfg, 2_000_000, stream(4))
    assert est.method == "monte-carlo" and est.M == 2_000_000
    assert abs(est.log_value - exact) < 4 * est.se
    assert est.se < 0.05


def test_mc_is_thread_independent():
    params = ModelParams(4.0, 1.0, 30)
    cfg = make_epsilon_config(4.0, 1.0, 0.8)
    g = sample_er(params, stream(1))
    one = mc_Y(g, params, cfg, 3_000_000, stream(2), threads=1)
    four = mc_Y(g, params, cfg, 3_000_000, stream(2), threads=4)
    assert one.log_value == four.log_value and one.se == four.se


def test_budget():
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    assert budget_formula(20, cfg) == pytest.approx(100 * 8000 * math.exp(4))
    assert default_M(20, cfg) == math.ceil(100 * 8000 * math.exp(4))
    with pytest.warns(BudgetWarning):
        assert default_M(60, cfg, cap=10**6) == 10**6
    with pytest.raises(ParameterError):
        default_M(20, make_epsilon_config(4.6, 0.4, 0.1))


def test_run_test_decision_rule():
    params = ModelParams(4.6, 0.4, 14)
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    g = sample_er(params, stream(11))
    value = exact_Y(g, params, cfg).log_value
    assert run_test(g, params, cfg, 0.05, value).decision == "reject"  # ties reject
    assert run_test(g, params, cfg, 0.05, value + 1e-9).decision == "retain"
    res = run_test(g, params, cfg, 0.05, lambda p, c, a: value - 1)
    assert res.rejected and res.method == "exact"
    assert res.to_dict()["warnings"] == ["alternative_limit", "mc_alternative"]


def test_run_test_monte_carlo_needs_seed():
    params = ModelParams(4.6, 0.4, 14)
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    g = sample_er(params, stream(11))
    with pytest.raises(ParameterError):
        run_test(g, params, cfg, 0.05, 0.0, M=1000)
    a = run_test(g, params, cfg, 0.05, 0.0, M=10_000, seed=5)
    b = run_test(g, params, cfg, 0.05, 0.0, M=10_000, seed=5)
    assert a.to_json() == b.to_json() and a.M == 10_000


def test_run_test_overflowing_statistic():
    n = 24
    params = ModelParams(20.0, 0.5, n)
    cfg = make_epsilon_config(20.0, 0.5, 5.0)
    half = n // 2
    edges = [(u, v) for u in range(half) for v in range(u + 1, half)]
    edges += [(u, v) for u in range(half, n) for v in range(u + 1, n)]
    g = Graph.from_edges(n, edges[:200])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = run_test(g, params, cfg, 0.05, 0.5, exact_cap=26)
    assert math.isfinite(res.log_statistic)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_statistic_invariant_under_relabelling(seed):
    params = ModelParams(4.6, 0.4, 12)
    cfg = make_epsilon_config(4.6, 0.4, 1.1)
    g, _ = sample_sbm(params, stream(seed))
    perm = np.random.default_rng(seed).permutation(12)
    a = exact_Y(g, params, cfg).log_value
    b = exact_Y(g.relabel(perm), params, cfg).log_value
    assert a == pytest.approx(b, abs=1e-12)

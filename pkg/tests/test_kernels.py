import numpy as np
import pytest
from scipy import stats

from sbmtest import kernels
from sbmtest.kernels import _numpy

from conftest import random_graph

_numba = pytest.importorskip("sbmtest.kernels._numba")


def _edge_arrays(g):
    return g.eu, g.ev


@pytest.mark.parametrize("n", [5, 20, 70, 130])
def test_mc_histogram_backends_agree(n):
    g = random_graph(n, 3.0 / n, n)
    key = np.uint64(0xDEADBEEF12345)
    a = _numpy.mc_histogram(g.eu, g.ev, n, key, 17, 5000)
    b = _numba.mc_histogram(g.eu, g.ev, n, key, 17, 5000)
    assert np.array_equal(a, b)
    assert a.sum() == 5000 - 17


def test_mc_histogram_is_additive_over_ranges():
    g = random_graph(30, 0.1, 2)
    key = np.uint64(99)
    whole = kernels.mc_histogram(g.eu, g.ev, 30, key, 0, 3000)
    parts = kernels.mc_histogram(g.eu, g.ev, 30, key, 0, 1234) + kernels.mc_histogram(
        g.eu, g.ev, 30, key, 1234, 3000
    )
    assert np.array_equal(whole, parts)


@pytest.mark.parametrize("n", [24, 100])
def test_mc_labels_are_fair_coins(n):
    g = random_graph(n, 0.0, 0)
    hist = kernels.mc_histogram(g.eu, g.ev, n, np.uint64(7), 0, 200_000)[:, 0]
    expected = stats.binom.pmf(np.arange(n + 1), n, 0.5) * hist.sum()
    keep = expected > 20
    chi2 = ((hist[keep] - expected[keep]) ** 2 / expected[keep]).sum()
    assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-3


@pytest.mark.parametrize("seed", range(4))
def test_enum_histogram_backends_agree(seed):
    g = random_graph(11, 0.35, seed)
    args = (g.eu, g.ev, g.indptr, g.indices, 11, 0, 1 << 10)
    a = _numpy.enum_histogram(*args)
    b = _numba.enum_histogram(*args)
    assert np.array_equal(a, b)
    assert a.sum() == 1 << 10


def test_enum_histogram_matches_direct_enumeration():
    g = random_graph(8, 0.4, 3)
    hist = kernels.enum_histogram(g.eu, g.ev, g.indptr, g.indices, 8, 0, 1 << 7)
    direct = np.zeros_like(hist)
    for bits in range(1 << 8):
        if not bits & 1:
            continue
        s = np.array([(bits >> i) & 1 for i in range(8)])
        e_in = int(np.sum(s[g.eu] == s[g.ev]))
        direct[s.sum(), e_in] += 1
    assert np.array_equal(hist, direct)


@pytest.mark.parametrize("m", [3, 4, 5, 6, 7])
def test_cycle_backends_agree(m):
    g = random_graph(14, 0.3, m)
    a = _numpy.count_cycles(g.indptr, g.indices, 14, m)
    b = _numba.count_cycles(g.indptr, g.indices, 14, m)
    c = _numpy.count_cycles_dfs(g.indptr, g.indices, 14, m)
    assert a == b == c


@pytest.mark.parametrize("seed", range(8))
def test_power_iteration_matches_dense(seed):
    n = 25
    g = random_graph(n, 0.15, seed)
    p = 2 * g.num_edges / (n * (n - 1))
    mat = g.adjacency() - p * (np.ones((n, n)) - np.eye(n))
    top = np.linalg.eigvalsh(mat)[-1]
    x0 = np.random.default_rng(seed).standard_normal(n) + 1
    for backend in (_numpy, _numba):
        value, _ = backend.power_iteration(g.eu, g.ev, n, p, x0, 1e-10, 10_000 * n)
        assert value == pytest.approx(top, abs=1e-7)


def test_env_flag_selects_numpy_backend():
    import os
    import subprocess
    import sys

    code = (
        "from sbmtest import kernels, ModelParams, make_epsilon_config, exact_Y, sample_sbm, stream;"
        "p = ModelParams(4.6, 0.4, 18); g, _ = sample_sbm(p, stream(1));"
        "print(kernels.BACKEND, repr(exact_Y(g, p, make_epsilon_config(4.6, 0.4, 1.1)).log_value))"
    )
    outs = {}
    for flag in ("0", "1"):
        env = {**os.environ, "SBMTEST_DISABLE_NUMBA": flag}
        proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
        outs[flag] = proc.stdout.split()
    assert outs["0"][0] == "numba" and outs["1"][0] == "numpy"
    assert outs["0"][1] == outs["1"][1]

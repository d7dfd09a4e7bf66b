import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sbmtest.errors import DataError, ParameterError, ParseError
from sbmtest.graph import (
    CommunityLabels,
    Graph,
    ModelParams,
    _pair_from_index,
    count_cycles,
    induced_subgraph,
    parse_edge_list,
    read_edge_list,
    read_labels,
    sample_er,
    sample_er_p,
    sample_sbm,
    write_edge_list,
    write_labels,
)
from sbmtest.rng import stream

from conftest import brute_cycles, random_graph


def test_edges_are_canonical():
    g = Graph.from_edges(4, [(2, 1), (0, 3), (1, 2)])
    assert g.edges.tolist() == [[0, 3], [1, 2]]
    assert not g.edges.flags.writeable


def test_self_loop_rejected():
    with pytest.raises(DataError):
        Graph.from_edges(3, [(1, 1)])


def test_out_of_range_node_rejected():
    with pytest.raises(ParameterError):
        Graph.from_edges(3, [(0, 3)])


def test_adjacency_round_trip():
    g = random_graph(9, 0.4, 1)
    assert Graph.from_adjacency(g.adjacency()) == g
    assert g.degrees().sum() == 2 * g.num_edges


def test_components_sorted():
    g = Graph.from_edges(6, [(4, 5), (0, 2)])
    comps = [c.tolist() for c in g.components()]
    assert comps == [[0, 2], [1], [3], [4, 5]]


def test_model_params_rates():
    p = ModelParams(4.6, 0.4, 20)
    assert p.p0 == pytest.approx(2.5 / 20)
    assert p.p_in == pytest.approx(0.23)
    with pytest.raises(ParameterError):
        ModelParams(0.4, 4.6, 20)
    with pytest.raises(ParameterError):
        ModelParams(30.0, 20.0, 10)


def test_pair_index_matches_triu():
    n = 9
    u, v = _pair_from_index(np.arange(n * (n - 1) // 2), n)
    iu, iv = np.triu_indices(n, 1)
    assert np.array_equal(u, iu) and np.array_equal(v, iv)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 60))
def test_samplers_respect_invariants(seed, n):
    params = ModelParams(4.0, 1.0, max(n, 5))
    for g in (sample_er(params, stream(seed, 0)), sample_sbm(params, stream(seed, 1))[0]):
        e = g.edges
        assert np.all(e[:, 0] < e[:, 1])
        assert np.unique(e, axis=0).shape[0] == e.shape[0]
        assert e.size == 0 or e.max() < g.n


def test_er_edge_count_is_binomial():
    n, p = 50, 0.1
    counts = [sample_er_p(n, p, stream(5, i)).num_edges for i in range(4000)]
    pairs = n * (n - 1) // 2
    assert np.mean(counts) == pytest.approx(pairs * p, abs=4 * np.sqrt(pairs * p * (1 - p) / 4000))
    assert np.var(counts) == pytest.approx(pairs * p * (1 - p), rel=0.1)


def test_sbm_equal_rates_matches_er():
    params = ModelParams(3.0, 3.0, 40)
    er = [sample_er(params, stream(1, i)).num_edges for i in range(10_000)]
    sbm = [sample_sbm(params, stream(2, i))[0].num_edges for i in range(10_000)]
    assert stats.ks_2samp(er, sbm).pvalue > 0.01


def test_sbm_conditional_rates():
    params = ModelParams(8.0, 2.0, 200)
    within = across = pin = pout = 0
    for i in range(30):
        g, lab = sample_sbm(params, stream(9, i))
        s = lab.sigma
        same = s[g.edges[:, 0]] == s[g.edges[:, 1]]
        within += same.sum()
        across += (~same).sum()
        k = lab.n_plus
        pin += k * (k - 1) // 2 + (200 - k) * (199 - k) // 2
        pout += k * (200 - k)
    assert within / pin == pytest.approx(8 / 200, rel=0.06)
    assert across / pout == pytest.approx(2 / 200, rel=0.12)


def test_sbm_zero_across_rate_keeps_labels_apart():
    g, lab = sample_sbm(ModelParams(6.0, 0.0, 30), stream(3))
    s = lab.sigma
    assert np.all(s[g.edges[:, 0]] == s[g.edges[:, 1]])


def test_count_cycles_known_graphs(petersen):
    k5 = Graph.from_edges(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])
    assert [count_cycles(k5, m) for m in (3, 4, 5)] == [10, 15, 12]
    assert count_cycles(petersen, 3) == 0
    assert count_cycles(petersen, 4) == 0
    assert count_cycles(petersen, 5) == 12
    assert count_cycles(Graph.empty(2), 3) == 0


@pytest.mark.parametrize("seed", range(6))
def test_count_cycles_brute_force(seed):
    g = random_graph(8, 0.5, seed)
    for m in range(3, 8):
        assert count_cycles(g, m) == brute_cycles(g, m)


def test_count_cycles_bounds():
    g = random_graph(6, 0.5, 0)
    with pytest.raises(ParameterError):
        count_cycles(g, 2)
    with pytest.raises(ParameterError):
        count_cycles(g, 8)


def test_parse_edge_list_with_header_and_comments():
    g = parse_edge_list("# toy\nn 5\n0 1\n\n3 4  # trailing\n")
    assert g.n == 5 and g.num_edges == 2


def test_parse_one_based():
    g = parse_edge_list("1 2\n2 3\n", one_based=True)
    assert g.edges.tolist() == [[0, 1], [1, 2]]


def test_parse_error_has_line_number():
    with pytest.raises(ParseError) as info:
        parse_edge_list("0 1\n0 x\n")
    assert info.value.lineno == 2
    assert "line 2" in str(info.value)


def test_parse_self_loop_is_data_error():
    with pytest.raises(DataError):
        parse_edge_list("0 1\n2 2\n")


def test_edge_list_file_round_trip(tmp_path):
    g = random_graph(12, 0.3, 4)
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    assert read_edge_list(path) == g
    assert path.read_text() == g.to_text()


def test_labels_round_trip(tmp_path):
    lab = CommunityLabels(np.array([1, -1, -1, 1, 1], dtype=np.int8))
    write_labels(lab, tmp_path / "l.txt")
    assert np.array_equal(read_labels(tmp_path / "l.txt").sigma, lab.sigma)


def test_labels_pair_format(tmp_path):
    (tmp_path / "l.txt").write_text("1 -\n0 +\n")
    assert read_labels(tmp_path / "l.txt").sigma.tolist() == [1, -1]
    (tmp_path / "bad.txt").write_text("0 +\n0 -\n")
    with pytest.raises(ParseError):
        read_labels(tmp_path / "bad.txt")


def test_induced_subgraph():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    sub = induced_subgraph(g, [3, 2, 1])
    assert sub.n == 3 and sub.edges.tolist() == [[0, 1], [1, 2]]
    assert induced_subgraph(g, range(5)) == g
    with pytest.raises(ParameterError):
        induced_subgraph(g, [0, 0])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_relabel_preserves_cycle_counts(seed):
    g = random_graph(9, 0.45, seed)
    perm = np.random.default_rng(seed).permutation(9)
    h = g.relabel(perm)
    assert h.num_edges == g.num_edges
    assert all(count_cycles(h, m) == count_cycles(g, m) for m in (3, 4, 5))

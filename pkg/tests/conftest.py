import itertools

import numpy as np
import pytest

from sbmtest.graph import Graph


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    pairs = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < p]
    return Graph.from_edges(n, pairs)


def brute_cycles(g, m):
    """Count m-cycles by checking every vertex tuple (tiny graphs only)."""
    adj = g.adjacency().astype(bool)
    count = 0
    for nodes in itertools.combinations(range(g.n), m):
        first = nodes[0]
        for rest in itertools.permutations(nodes[1:]):
            if rest[0] > rest[-1]:
                continue
            cyc = (first,) + rest
            if all(adj[cyc[i], cyc[(i + 1) % m]] for i in range(m)):
                count += 1
    return count


@pytest.fixture
def petersen():
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph.from_edges(10, outer + spokes + inner)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance_report():
    def record(number, name, ok, detail):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])

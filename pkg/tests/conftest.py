import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from mpcsp.factor_graph import build_graph
from mpcsp.instances import GeneratorSpec, clause_graph, toy_3sat


@pytest.fixture
def toy():
    return toy_3sat()


@pytest.fixture
def contradiction():
    """x1 and not x1."""
    return clause_graph(1, [[1], [-1]])


def random_csp(rng, n, n_factors, max_domain=3, max_arity=3, density=0.7):
    """Random tables over random scopes; every table keeps at least one allowed row."""
    domains = rng.integers(2, max_domain + 1, size=n).tolist()
    cons = []
    for _ in range(n_factors):
        k = int(rng.integers(1, min(max_arity, n) + 1))
        scope = rng.choice(n, size=k, replace=False).tolist()
        size = int(np.prod([domains[i] for i in scope]))
        table = (rng.random(size) < density).astype(np.uint8)
        table[rng.integers(size)] = 1
        cons.append((scope, table))
    return build_graph(domains, cons)


def random_tree(rng, n, max_domain=3, density=0.7):
    """Pairwise constraints along a random spanning tree plus random unary factors."""
    domains = rng.integers(2, max_domain + 1, size=n).tolist()
    cons = []
    for i in range(1, n):
        j = int(rng.integers(i))
        size = domains[i] * domains[j]
        table = (rng.random(size) < density).astype(np.uint8)
        table[rng.integers(size)] = 1
        cons.append(((j, i), table))
    for i in range(n):
        if rng.random() < 0.3:
            table = (rng.random(domains[i]) < 0.8).astype(np.uint8)
            table[rng.integers(domains[i])] = 1
            cons.append(((i,), table))
    return build_graph(domains, cons)


def small_instance(rng, kind):
    """One small instance of the given kind with at most 2**16 assignments."""
    if kind == "ksat":
        n = int(rng.integers(4, 13))
        return GeneratorSpec("ksat", n, int(rng.integers(1, 4 * n)), seed=int(rng.integers(2**31))).generate()
    if kind == "qcol":
        n = int(rng.integers(3, 10))
        return GeneratorSpec("qcol", n, int(rng.integers(1, 2 * n)), q=3, seed=int(rng.integers(2**31))).generate()
    if kind == "tree":
        return random_tree(rng, int(rng.integers(2, 10)))
    return random_csp(rng, int(rng.integers(2, 8)), int(rng.integers(1, 8)))


def all_assignments(graph):
    return [np.array(a) for a in itertools.product(*[range(d) for d in graph.domains])]


@st.composite
def small_graphs(draw, max_vars=6, max_domain=3, max_arity=3, max_factors=None):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, max_vars))
    m = draw(st.integers(0, 2 * max_vars if max_factors is None else max_factors))
    return random_csp(np.random.default_rng(seed), n, m, max_domain, max_arity)


CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[CRITERIA] = {}


@pytest.fixture
def criterion(request):
    """``report(n, ok, detail)`` prints one pass/fail line and keeps it for the summary."""

    def report(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[CRITERIA][n] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])

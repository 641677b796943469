import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from advim.graph import Graph, assign_weights  # noqa: E402

S, B, C = 0, 1, 2


@pytest.fixture
def g1():
    """s -> b -> c, every weight 1."""
    return Graph.from_edges(3, [(S, B), (B, C)], [1.0, 1.0], labels=["s", "b", "c"])


@pytest.fixture
def g2():
    """s -> b (0.5), s -> c (0.3), b -> c (0.5)."""
    return Graph.from_edges(3, [(S, B), (S, C), (B, C)], [0.5, 0.3, 0.5], labels=["s", "b", "c"])


def random_graph(rng, n_min=3, n_max=8, dag=None, scheme=None, density=None):
    """Small random graph with seeds; returns ``(graph, seeds)``."""
    n = int(rng.integers(n_min, n_max + 1))
    if dag is None:
        dag = bool(rng.random() < 0.5)
    if dag:
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    p = density if density is not None else rng.uniform(0.2, 0.5)
    keep = [pr for pr in pairs if rng.random() < p]
    if not keep:
        keep = [pairs[int(rng.integers(len(pairs)))]]
    g = Graph.from_edges(n, keep)
    if scheme is None:
        scheme = ["weighted-cascade", "uniform", "explicit"][int(rng.integers(3))]
    if scheme == "weighted-cascade":
        g = assign_weights(g, "weighted-cascade")
    elif scheme == "uniform":
        g = assign_weights(g, "uniform", float(rng.choice([0.2, 0.3, 0.5])))
    else:
        w = np.empty(g.m)
        for v in range(n):
            ins = g.in_edges(v)
            if len(ins):
                raw = rng.random(len(ins) + 1)
                w[ins] = np.floor(1000 * raw[:-1] / raw.sum()) / 1000
        g = g.with_weights(w)
    k = int(rng.integers(1, max(2, n // 3) + 1))
    # prefer sources as seeds so something is usually reachable
    order = np.lexsort((rng.random(n), -g.out_degree))
    seeds = np.sort(order[:k])
    return g, seeds


def to_triples(g):
    return [(int(u), int(v), float(w)) for u, v, w in zip(g.src, g.dst, g.weight)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])

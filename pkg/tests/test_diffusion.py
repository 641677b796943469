import numpy as np
import pytest

from advim.diffusion import (
    ExactOracle,
    estimate_reduction,
    estimate_spread,
    exact_reduction,
    exact_spread,
    forward_simulate,
    paired_reduction_samples,
    sample_choices,
    sample_live_edge_graph,
)
from advim.graph import AttackSet, Graph, assign_weights

import oracles
from conftest import random_graph, to_triples

S, B, C = 0, 1, 2


def test_live_edge_g1_deterministic(g1, rng):
    for _ in range(20):
        L = sample_live_edge_graph(g1, rng)
        assert [L.parent(v) for v in range(3)] == [None, S, B]


def test_live_edge_g2_frequencies(g2, rng):
    choice = sample_choices(g2, rng, 100_000)
    both = (choice[:, B] == g2.edge_id(S, B)) & (choice[:, C] == g2.edge_id(B, C))
    se = np.sqrt(0.25 * 0.75 / 1e5)
    assert abs(both.mean() - 0.25) < 4 * se
    none_c = (choice[:, C] == -1).mean()
    assert abs(none_c - 0.2) < 4 * np.sqrt(0.16 / 1e5)


def test_live_edge_probability(g2):
    L_edges = np.array([-1, g2.edge_id(S, B), g2.edge_id(B, C)])
    from advim.diffusion import LiveEdgeGraph
    assert LiveEdgeGraph(g2, L_edges).probability() == pytest.approx(0.25)


def test_isolated_node_selects_none(rng):
    g = assign_weights(Graph.from_edges(3, [(0, 1)]), "weighted-cascade")
    assert (sample_choices(g, rng, 1000)[:, 2] == -1).all()


def test_forward_simulate(g1, g2, rng):
    assert forward_simulate(g1, [S], rng) == {S, B, C}
    hits = sum(B in forward_simulate(g2, [S], rng) for _ in range(20_000))
    assert abs(hits / 20_000 - 0.5) < 4 * np.sqrt(0.25 / 20_000)
    assert forward_simulate(g2, [S, B, C], rng) == {S, B, C}


def test_threshold_and_live_edge_agree(rng):
    g, seeds = random_graph(np.random.default_rng(3), 6, 6, dag=False, scheme="weighted-cascade")
    a = estimate_spread(g, seeds, 20_000, rng, "live-edge")
    b = estimate_spread(g, seeds, 20_000, rng, "threshold")
    assert abs(a.mean - b.mean) < 3 * np.hypot(a.stderr, b.stderr)


def test_estimate_spread_examples(g1, g2, rng):
    est = estimate_spread(g1, [S], 100, rng)
    assert (est.mean, est.stderr) == (3.0, 0.0)
    est = estimate_spread(g2, [S], 100_000, rng)
    assert abs(est.mean - 2.05) < 3 * est.stderr
    bare = assign_weights(Graph.from_edges(3, []), "weighted-cascade")
    est = estimate_spread(bare, [0], 50, rng)
    assert (est.mean, est.stderr) == (1.0, 0.0)


def test_estimate_reduction_examples(g1, g2, rng):
    assert estimate_reduction(g1, [S], AttackSet(frozenset([B])), 100, rng=rng).mean == 2.0
    est = estimate_reduction(g2, [S], AttackSet(frozenset([B])), 100_000, rng=rng)
    assert abs(est.mean - 0.75) < 3 * est.stderr
    zero = estimate_reduction(g2, [S], AttackSet(), 1000, rng=rng)
    assert (zero.mean, zero.stderr) == (0.0, 0.0)
    with pytest.raises(ValueError):
        estimate_reduction(g2, [S], AttackSet(frozenset([S])), 10, rng=rng)


def test_unpaired_noisier_than_paired(g2, rng):
    a = AttackSet(edges=frozenset([(S, C)]))
    paired = estimate_reduction(g2, [S], a, 50_000, True, rng)
    unpaired = estimate_reduction(g2, [S], a, 50_000, False, rng)
    assert not unpaired.paired and paired.paired
    assert paired.stderr < unpaired.stderr
    assert abs(unpaired.mean - 0.3) < 4 * unpaired.stderr


def test_paired_samples_nonnegative(rng):
    for t in range(20):
        g, seeds = random_graph(np.random.default_rng(t))
        cand = [v for v in range(g.n) if v not in set(seeds.tolist())]
        a = AttackSet(frozenset(cand[:1]), frozenset(g.edge_list()[:1]))
        assert (paired_reduction_samples(g, seeds, a, 500, rng) >= 0).all()


def test_exact_examples(g1, g2):
    assert exact_spread(g1, [S]) == 3.0
    assert exact_spread(g2, [S]) == pytest.approx(2.05)
    assert exact_spread(g2, [S, B]) == pytest.approx(2.8)
    assert exact_reduction(g1, [S], AttackSet(edges=frozenset([(B, C)]))) == 1.0
    assert exact_reduction(g2, [S], AttackSet(frozenset([B]))) == pytest.approx(0.75)
    assert exact_reduction(g2, [S], AttackSet(edges=frozenset([(S, C)]))) == pytest.approx(0.30)


def test_exact_cap():
    g = assign_weights(Graph.from_edges(6, [(i, j) for i in range(6) for j in range(6) if i != j]), "weighted-cascade")
    with pytest.raises(ValueError, match="configurations"):
        ExactOracle(g, cap=1000)


def test_exact_matches_reference_oracle():
    rng = np.random.default_rng(7)
    for _ in range(30):
        g, seeds = random_graph(rng, 3, 6)
        tri = to_triples(g)
        s = seeds.tolist()
        assert exact_spread(g, s) == pytest.approx(float(oracles.spread(g.n, tri, s)), abs=1e-12)
        cand = [v for v in range(g.n) if v not in s]
        nodes = frozenset(cand[:1])
        edges = frozenset(g.edge_list()[-1:])
        want = oracles.reduction(g.n, tri, s, nodes, edges)
        assert exact_reduction(g, s, AttackSet(nodes, edges)) == pytest.approx(float(want), abs=1e-12)


def test_exact_equals_difference_of_spreads():
    from advim.graph import remove_elements

    g, seeds = random_graph(np.random.default_rng(11), 6, 6)
    a = AttackSet(edges=frozenset(g.edge_list()[:2]))
    direct = exact_reduction(g, seeds, a)
    diff = exact_spread(g, seeds) - exact_spread(remove_elements(g, a), seeds)
    assert direct == pytest.approx(diff, abs=1e-12)


def test_same_seed_same_output(g2):
    a = estimate_spread(g2, [S], 1000, np.random.default_rng(5))
    b = estimate_spread(g2, [S], 1000, np.random.default_rng(5))
    assert a == b

import math

import numpy as np
import pytest

from advim import ForwardForestAttack
from advim.diffusion import exact_reduction
from advim.forest import (
    MemoryCapError,
    aaff_select,
    build_scored_forests,
    forest_bytes,
    theta_times_opt,
)
from advim.graph import AttackSet, Budgets, Graph

from conftest import random_graph

S, B, C = 0, 1, 2
N = 3  # edge element ids start here on the three-node fixtures


def test_g1_scores(g1, rng):
    f = build_scored_forests(g1, [S], 10, rng)
    assert f.node_scores.tolist() == [0, 20, 10]
    assert f.edge_scores[g1.edge_id(S, B)] == 20
    assert f.edge_scores[g1.edge_id(B, C)] == 10
    assert f.forest(0).parent == {B: S, C: B}


def test_all_seeds_zero(g2, rng):
    f = build_scored_forests(g2, [S, B, C], 5, rng)
    assert not f.node_scores.any() and not f.edge_scores.any()


def test_g2_node_score_unbiased(g2, rng):
    theta = 100_000
    f = build_scored_forests(g2, [S], theta, rng)
    per = f.size[:, B].astype(float)
    mean, se = per.mean(), per.std(ddof=1) / math.sqrt(theta)
    assert f.node_scores[B] / theta == pytest.approx(mean)
    assert abs(mean - 0.75) < 3 * se


def test_g1_select_single(g1, rng):
    f = build_scored_forests(g1, [S], 10, rng)
    assert aaff_select(f, Budgets(1, 0), inplace=True) == [B]
    assert f.node_scores[C] == 0 and f.edge_scores[g1.edge_id(B, C)] == 0
    assert f.edge_scores[g1.edge_id(S, B)] == 0


def test_g1_zero_gain_stop(g1, rng):
    f = build_scored_forests(g1, [S], 10, rng)
    assert aaff_select(f, Budgets(2, 0)) == [B]


def test_g1_node_before_edge_tie(g1, rng):
    f = build_scored_forests(g1, [S], 10, rng)
    assert aaff_select(f, Budgets(1, 1)) == [B]


def test_select_does_not_mutate_by_default(g1, rng):
    f = build_scored_forests(g1, [S], 10, rng)
    before = f.node_scores.copy()
    aaff_select(f, Budgets(1, 0))
    assert np.array_equal(before, f.node_scores)


def test_seed_incident_edge_scoreable(g2, rng):
    f = build_scored_forests(g2, [S], 200, rng)
    e = g2.edge_id(S, B)
    assert f.edge_scores[e] == f.size[f.pedge[:, B] == e, B].sum() > 0


def test_incremental_equals_recompute(rng):
    for t in range(100):
        g, seeds = random_graph(np.random.default_rng(t))
        f = build_scored_forests(g, seeds, 30, rng)
        cand = [v for v in range(g.n) if v not in set(seeds.tolist())] + [g.n + e for e in range(g.m)]
        for a in rng.permutation(cand)[:5]:
            f.remove(int(a))
            nodes, edges = f.recompute_scores()
            assert np.array_equal(nodes, f.node_scores)
            assert np.array_equal(edges, f.edge_scores)
            assert (f.node_scores >= 0).all() and (f.edge_scores >= 0).all()


def test_memory_cap(g2, rng):
    with pytest.raises(MemoryCapError):
        build_scored_forests(g2, [S], 1000, rng, memory_cap=forest_bytes(g2, 1000) - 1)


def test_theta_times_opt_formula(g2):
    got = theta_times_opt(g2, 1, Budgets(1, 0), 0.1, 1.0)
    n_minus = 2
    alpha = math.sqrt(math.log(n_minus) + math.log(2))
    beta = math.sqrt(0.5 * (math.log(2) + math.log(n_minus) + math.log(2)))
    assert got == pytest.approx(3 * 3 * (alpha / 2 + beta) ** 2 / 0.01)


def _exact_greedy(oracle, g, seeds, qn, qe):
    chosen = AttackSet()
    cands = [("n", v) for v in range(g.n) if v not in set(seeds.tolist())] + [("e", e) for e in g.edge_list()]
    base = 0.0
    while qn + qe:
        best, pick = 0.0, None
        for kind, x in cands:
            if (kind == "n" and (qn == 0 or x in chosen.nodes)) or (kind == "e" and (qe == 0 or x in chosen.edges)):
                continue
            trial = chosen | (AttackSet(frozenset([x])) if kind == "n" else AttackSet(edges=frozenset([x])))
            gain = oracle.reduction(seeds, trial) - base
            if gain > best + 1e-12:
                best, pick = gain, (kind, trial)
        if pick is None:
            break
        chosen, base = pick[1], base + best
        qn, qe = (qn - 1, qe) if pick[0] == "n" else (qn, qe - 1)
    return chosen, base


def test_large_theta_agrees_with_exact_greedy():
    from advim.diffusion import ExactOracle

    rng = np.random.default_rng(5)
    for t in range(5):
        g, seeds = random_graph(rng, 5, 7, scheme="weighted-cascade", density=0.4)
        oracle = ExactOracle(g)
        _, want = _exact_greedy(oracle, g, seeds, 1, 1)
        f = build_scored_forests(g, seeds, 50_000, np.random.default_rng(t))
        start = (f.parent >= 0).sum(axis=1)
        picked = AttackSet.from_element_ids(g, aaff_select(f, Budgets(1, 1), inplace=True))
        cut = start - (f.parent >= 0).sum(axis=1)
        se = cut.std(ddof=1) / math.sqrt(len(cut))
        assert abs(oracle.reduction(seeds, picked) - want) <= 3 * se + 1e-9


def test_estimator(g1):
    est = ForwardForestAttack(node_budget=1, theta=100, random_state=0)
    assert est.get_params()["theta"] == 100
    h = est.fit_transform(g1, [S])
    assert est.attack_set_ == AttackSet(frozenset([B]))
    assert est.report_.est_reduction == 2.0
    assert h.m == 0
    assert exact_reduction(g1, [S], est.attack_set_) == 2.0

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from advim import AAIMMAttack
from advim.attack import (
    PathCollection,
    adjusted_ell,
    aaimm_attack,
    lambda_prime,
    lambda_star,
    log_binom,
    node_edge_selection,
)
from advim.diffusion import ExactOracle, exact_reduction
from advim.graph import AttackSet, Budgets, Graph, assign_weights
from advim.sampling import NaiveVRRSampler
from advim.validation import NotFittedError

import oracles

S, B, C = 0, 1, 2

# pinned from tests/oracles.py (mpmath, 50 digits)
LAMBDA_PRIME_PIN = 1685520.1878470304635
LAMBDA_STAR_PIN = 3315878.4384158666335


def test_lambda_pins():
    assert lambda_prime(999, 10**4, 1, 0, math.sqrt(2) * 0.1, 1.0) == pytest.approx(LAMBDA_PRIME_PIN, rel=1e-12)
    assert lambda_star(1000, 999, 10**4, 1, 0, 0.1, 1.0) == pytest.approx(LAMBDA_STAR_PIN, rel=1e-12)


def test_lambda_domain_errors():
    with pytest.raises(ValueError):
        lambda_prime(10, 5, 0, 0, 0.1, 1)
    with pytest.raises(ValueError):
        lambda_star(11, 10, 5, 0, 0, 0.1, 1)
    with pytest.raises(ValueError):
        lambda_prime(10, 5, 11, 0, 0.1, 1)


def test_lambda_monotonicity():
    assert lambda_prime(999, 10**4, 1, 0, 0.14, 2.0) > lambda_prime(999, 10**4, 1, 0, 0.14, 1.0)
    assert lambda_star(1000, 999, 10**4, 1, 0, 0.2, 1.0) < lambda_star(1000, 999, 10**4, 1, 0, 0.1, 1.0)
    assert lambda_star(1000, 999, 10**4, 1, 0, 0.1, 1.0) < lambda_star(1000, 999, 10**4, 2, 0, 0.1, 1.0)


def test_log_binom_large():
    assert log_binom(10**5, 0) == 0.0
    assert log_binom(10**5, 10**5) == 0.0
    assert log_binom(10**5, 50) == pytest.approx(float(oracles.mpmath.log(oracles.mpmath.binomial(10**5, 50))), rel=1e-12)


def test_adjusted_ell_grows():
    ell = adjusted_ell(1000, 999, 10**4, 5, 5, 0.1, 1.0)
    assert ell > 1.0


def collection_r():
    # P1: {b,(s,b)}, P2: {c,(s,c)}, P3: {b,c,(s,b),(b,c)} on G2; edge ids (s,b)=0,(s,c)=1,(b,c)=2
    n = 3
    return PathCollection.from_sets(n, 3, [[B, n + 0], [C, n + 1], [B, C, n + 0, n + 2]])


@pytest.mark.parametrize("method", ["incremental", "lazy"])
@pytest.mark.parametrize(
    "budgets,chosen,cov",
    [((1, 0), [B], 2 / 3), ((0, 1), [3 + 0], 2 / 3), ((1, 1), [B, 3 + 1], 1.0)],
)
def test_greedy_examples(method, budgets, chosen, cov):
    got, c = node_edge_selection(collection_r(), Budgets(*budgets), method)
    assert got == chosen and c == pytest.approx(cov)


def test_greedy_zero_gain_stops():
    got, cov = node_edge_selection(collection_r(), Budgets(3, 0))
    assert got == [B, C] and cov == 1.0


def test_greedy_empty_collection():
    with pytest.raises(ValueError):
        node_edge_selection(PathCollection(3, 3), Budgets(1, 0))


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_greedy_half_of_best(data):
    n_nodes = data.draw(st.integers(1, 6))
    n_edges = data.draw(st.integers(0, 12 - n_nodes))
    elems = list(range(n_nodes)) + [n_nodes + e for e in range(n_edges)]
    paths = data.draw(st.lists(st.lists(st.sampled_from(elems), min_size=1, max_size=4, unique=True),
                               min_size=1, max_size=20))
    qn = data.draw(st.integers(0, n_nodes))
    qe = data.draw(st.integers(0, n_edges))
    if qn + qe == 0:
        qn = 1
    coll = PathCollection.from_sets(n_nodes, n_edges, paths)
    inc, cov = node_edge_selection(coll, Budgets(qn, qe), "incremental")
    lazy, cov2 = node_edge_selection(coll, Budgets(qn, qe), "lazy")
    assert inc == lazy and cov == cov2
    best = 0.0
    sets = [frozenset(p) for p in paths]
    for a in itertools.combinations(range(n_nodes), min(qn, n_nodes)):
        for b in itertools.combinations(range(n_nodes, n_nodes + n_edges), min(qe, n_edges)):
            pick = set(a) | set(b)
            best = max(best, sum(bool(s & pick) for s in sets) / len(sets))
    assert cov >= 0.5 * best - 1e-12
    assert cov == pytest.approx(sum(bool(s & set(inc)) for s in sets) / len(sets))


def test_aaimm_g1(g1):
    for sampler in ("naive", "fb", "dag"):
        a, rep = aaimm_attack(g1, [S], Budgets(1, 0), 0.1, 1.0, sampler, np.random.default_rng(0))
        assert a == AttackSet(frozenset([B]))
        assert rep.est_reduction == pytest.approx(2.0, rel=0.05)
        assert rep.theta >= lambda_star(3, 2, 2, 1, 0, 0.1, rep.ell_adjusted) / rep.lb - 1e-9
        assert rep.lb <= 2
        assert rep.paths_sampled >= rep.theta


def test_aaimm_g2_edge(g2):
    oracle = ExactOracle(g2)
    rho = {e: oracle.reduction([S], AttackSet(edges=frozenset([e]))) for e in g2.edge_list()}
    best = max(rho.values())
    # (s,b) cuts b and the c<-b<-s branch: 0.5 + 0.25
    assert rho[(S, B)] == pytest.approx(0.75) and rho[(S, B)] == best
    for sampler in ("naive", "fb", "dag"):
        a, _ = aaimm_attack(g2, [S], Budgets(0, 1), 0.1, 1.0, sampler, np.random.default_rng(1))
        assert oracle.reduction([S], a) == pytest.approx(best)


def test_aaimm_full_budget_covers_everything(g2):
    a, rep = aaimm_attack(g2, [S], Budgets(2, 0), rng=np.random.default_rng(2))
    assert rep.coverage == 1.0
    assert rep.scaled_objective == pytest.approx(2.0)


def test_aaimm_report_text(g1):
    _, rep = aaimm_attack(g1, [S], Budgets(1, 0), rng=np.random.default_rng(3))
    text = rep.to_text()
    for key in ("theta", "paths_sampled", "lb", "epsilon", "ell_adjusted", "sampler", "coverage",
                "est_reduction", "wall_ms"):
        assert f"\n{key}=" in "\n" + text
    assert rep.regime == "1-1/e-eps"


def test_aaimm_flags_extracted_dag():
    g = Graph.from_edges(3, [(0, 1), (1, 2), (2, 1)], [0.5, 0.5, 0.5])
    _, rep = aaimm_attack(g, [0], Budgets(1, 0), sampler="dag", rng=np.random.default_rng(0))
    assert rep.dag_extracted


def test_aaimm_dag_edge_ids_on_extracted_dag():
    # extraction drops (2, 0), so edge ids of the DAG and of g disagree
    g = Graph.from_edges(3, [(0, 2), (2, 0), (2, 1)], [0.2, 0.2, 0.2])
    a, rep = aaimm_attack(g, [0, 2], Budgets(0, 1), sampler="dag", rng=np.random.default_rng(0))
    assert rep.dag_extracted
    assert a == AttackSet(edges=frozenset([(2, 1)]))


def test_aaimm_errors(g2):
    with pytest.raises(ValueError):
        aaimm_attack(g2, [S], Budgets(0, 0))
    with pytest.raises(ValueError):
        aaimm_attack(g2, [S], Budgets(1, 0), epsilon=1.5)
    with pytest.raises(ValueError):
        aaimm_attack(g2, [S], Budgets(1, 0), sampler="bogus")


def test_coverage_identity_raw_paths(g2, rng):
    # n^- times the covered fraction of raw RR paths (invalid ones cover nothing) estimates rho
    s = NaiveVRRSampler(g2, [S])
    n = 100_000
    roots = rng.integers(1, 3, n)
    batch = s.walk(roots, rng)
    coll = PathCollection(3, 3)
    coll.add(batch.select(np.flatnonzero(batch.valid)))
    for a, rho in [(AttackSet(frozenset([B])), 0.75), (AttackSet(edges=frozenset([(S, C)])), 0.30)]:
        frac = coll.coverage(a.element_ids(g2)) * len(coll) / n
        se = 2 * math.sqrt(frac * (1 - frac) / n)
        assert abs(2 * frac - rho) < 3 * se


def test_est_reduction_tracks_exact():
    g = assign_weights(Graph.from_edges(5, [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)]), "weighted-cascade")
    for sampler in ("naive", "dag"):
        a, rep = aaimm_attack(g, [0], Budgets(1, 0), sampler=sampler, rng=np.random.default_rng(4))
        rho = exact_reduction(g, [0], a)
        assert rep.est_reduction == pytest.approx(rho, rel=0.05)


def test_estimator_api(g1, g2):
    est = AAIMMAttack(node_budget=1, edge_budget=0, random_state=0)
    params = est.get_params()
    assert params["node_budget"] == 1 and params["sampler"] == "dag"
    est2 = clone(est).set_params(sampler="naive")
    assert est2.sampler == "naive" and est.sampler == "dag"
    with pytest.raises(NotFittedError):
        est.transform(g1)
    h = est.fit_transform(g1, [S])
    assert est.attack_set_ == AttackSet(frozenset([B]))
    assert h.m == 0
    assert est.score(g1, [S], sims=100, random_state=0) == 2.0
    assert est.report_.sampler == "dag"


def test_estimator_deterministic(g2):
    a = AAIMMAttack(1, 1, random_state=9).fit(g2, [S])
    b = AAIMMAttack(1, 1, random_state=9).fit(g2, [S])
    assert a.attack_set_ == b.attack_set_
    assert a.report_.paths_sampled == b.report_.paths_sampled

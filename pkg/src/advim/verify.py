"""Brute-force checks of the estimators and samplers on one small graph."""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass

from .attack import aaimm_attack
from .diffusion import ExactOracle, estimate_reduction
from .graph import AttackSet, Budgets, Graph
from .sampling import DagVRRSampler, ForwardBackwardSampler, NaiveVRRSampler, SamplingError
from .validation import check_graph, check_random_state, check_seeds


@dataclass
class CheckResult:
    name: str
    passed: bool | None  # None: reported only
    detail: str

    def line(self) -> str:
        tag = {True: "PASS", False: "FAIL", None: "INFO"}[self.passed]
        return f"{tag} {self.name}: {self.detail}"


def exact_vrr_distribution(g: Graph, seeds) -> tuple[dict[tuple[int, ...], float], float]:
    """Exact conditional law of valid reverse paths, and ``Pr[valid]``.

    A reverse walk visits distinct nodes until it stops, and every node
    picks its live in-edge independently, so a path's probability is the
    root probability ``1/n^-`` times the product of its edge weights.
    """
    g = check_graph(g)
    seeds = set(check_seeds(g, seeds).tolist())
    roots = [v for v in range(g.n) if v not in seeds]
    mass: dict[tuple[int, ...], float] = {}

    def walk(path, p):
        v = path[-1]
        for e in g.in_edges(v).tolist():
            u = int(g.src[e])
            w = float(g.weight[e])
            if w == 0 or u in path:
                continue
            if u in seeds:
                mass[path + (u,)] = p * w
            else:
                walk(path + (u,), p * w)

    for r in roots:
        walk((r,), 1.0 / len(roots))
    total = sum(mass.values())
    return ({k: v / total for k, v in mass.items()} if total > 0 else {}), total


def empirical_paths(sampler, count: int, rng) -> Counter:
    batch = sampler.sample(count, rng)
    return Counter(tuple(batch.nodes[i, : batch.length[i]].tolist()) for i in range(len(batch)))


def tv_distance(exact: dict, counts: Counter) -> float:
    total = sum(counts.values())
    keys = set(exact) | set(counts)
    return 0.5 * sum(abs(exact.get(k, 0.0) - counts.get(k, 0) / total) for k in keys)


def feasible_attacks(g: Graph, seeds, q_nodes: int, q_edges: int):
    """Every attack set with at most ``q_nodes`` non-seed nodes and ``q_edges`` edges."""
    seeds = set(int(s) for s in seeds)
    cand = [v for v in range(g.n) if v not in seeds]
    edges = g.edge_list()
    for a in range(min(q_nodes, len(cand)) + 1):
        for ns in itertools.combinations(cand, a):
            for b in range(min(q_edges, len(edges)) + 1):
                for es in itertools.combinations(edges, b):
                    yield AttackSet(frozenset(ns), frozenset(es))


def optimum(oracle: ExactOracle, seeds, q_nodes: int, q_edges: int) -> float:
    attacks = list(feasible_attacks(oracle.graph, seeds, q_nodes, q_edges))
    return max(oracle.reductions(seeds, attacks))


def run_verify(g: Graph, seeds, samples: int = 100_000, sims: int = 100_000, rng=None) -> list[CheckResult]:
    g = check_graph(g)
    seeds = check_seeds(g, seeds)
    rng = check_random_state(rng)
    oracle = ExactOracle(g)
    out = []
    n_minus = g.n - len(seeds)
    cand = [v for v in range(g.n) if v not in set(seeds.tolist())]

    # paired Monte Carlo against enumeration, on every singleton attack
    singles = [AttackSet(frozenset([v])) for v in cand] + [AttackSet(edges=frozenset([e])) for e in g.edge_list()]
    exact = oracle.reductions(seeds, singles)
    outside = 0
    for a, rho in zip(singles, exact):
        est = estimate_reduction(g, seeds, a, sims, True, rng)
        outside += abs(est.mean - rho) > 3 * est.stderr + 1e-12
    allowed = max(1, len(singles) // 100)
    out.append(CheckResult("mc-vs-exact", outside <= allowed,
                           f"{outside} of {len(singles)} singleton attacks outside 3 stderr"))

    # monotonicity and submodularity over singleton extensions of small sets
    ids = [("n", v) for v in cand] + [("e", e) for e in g.edge_list()]

    def as_attack(items):
        return AttackSet(frozenset(x for t, x in items if t == "n"), frozenset(x for t, x in items if t == "e"))

    small = [frozenset(c) for k in range(3) for c in itertools.combinations(ids, k)][:200]
    cache = {}

    def rho(items):
        if items not in cache:
            cache[items] = oracle.reduction(seeds, as_attack(items))
        return cache[items]

    bad = checked = 0
    for A in small:
        for B in small:
            if not A <= B:
                continue
            for x in ids:
                if x in B:
                    continue
                checked += 1
                ga, gb = rho(A | {x}) - rho(A), rho(B | {x}) - rho(B)
                if gb < -1e-9 or ga < gb - 1e-9:
                    bad += 1
            if checked > 5000:
                break
    out.append(CheckResult("monotone-submodular", bad == 0, f"{bad} violations in {checked} triples"))

    law, p_valid = exact_vrr_distribution(g, seeds)
    if p_valid == 0:
        out.append(CheckResult("samplers", None, "seeds reach no other node"))
        return out
    naive = NaiveVRRSampler(g, seeds)
    tv = tv_distance(law, empirical_paths(naive, samples, rng))
    out.append(CheckResult("naive-tv", tv < 0.02, f"TV = {tv:.4f}"))
    rate = naive.acceptance_rate()
    se = math.sqrt(p_valid * (1 - p_valid) / naive.stats.attempts) or 1e-12
    out.append(CheckResult("acceptance-rate", abs(rate - p_valid) <= 3 * se,
                           f"{rate:.4f} vs sigma^-/n^- = {p_valid:.4f}"))
    if g.is_acyclic():
        tv = tv_distance(law, empirical_paths(DagVRRSampler(g, seeds), samples, rng))
        out.append(CheckResult("dag-tv", tv < 0.02, f"TV = {tv:.4f}"))
    tv = tv_distance(law, empirical_paths(ForwardBackwardSampler(g, seeds), samples, rng))
    out.append(CheckResult("fb-tv", None, f"TV = {tv:.4f}"))

    for qn, qe in [(1, 0), (0, 1), (1, 1)]:
        if qn > n_minus or qe > g.m:
            continue
        opt = optimum(oracle, seeds, qn, qe)
        try:
            attack, _ = aaimm_attack(g, seeds, Budgets(qn, qe), rng=rng, sampler="naive")
        except SamplingError as exc:
            out.append(CheckResult(f"aaimm q=({qn},{qe})", False, str(exc)))
            continue
        got = oracle.reduction(seeds, attack)
        out.append(CheckResult(f"aaimm q=({qn},{qe})", got >= (0.5 - 0.1) * opt - 1e-12,
                               f"rho = {got:.4f}, OPT = {opt:.4f}"))
    return out

"""Linear threshold diffusion: live-edge sampling, Monte Carlo and exact oracles.

A live-edge configuration is stored as an int array ``choice`` with one entry
per node: the edge id of the node's live in-edge, or ``-1`` for none. Batches
of configurations are 2-D arrays of shape ``(batch, n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .graph import AttackSet, Graph
from .validation import check_attack, check_graph, check_random_state, check_seeds, seed_mask

DEFAULT_SIMS = 10_000
ENUMERATION_CAP = 2**24
# Upper bound on batch * n entries held at once by the vectorized kernels.
_CHUNK_ENTRIES = 2**22


@dataclass(frozen=True)
class LiveEdgeGraph:
    graph: Graph
    choice: np.ndarray

    def parent(self, v: int) -> int | None:
        e = self.choice[v]
        return None if e < 0 else int(self.graph.src[e])

    def edges(self) -> list[tuple[int, int]]:
        return [self.graph.edge(int(e)) for e in self.choice if e >= 0]

    def probability(self) -> float:
        """``Pr[L | G]``: product over nodes of the chosen configuration's mass."""
        g = self.graph
        p = np.where(self.choice >= 0, g.weight[np.maximum(self.choice, 0)], 1.0 - g.in_weight_sum)
        return float(np.prod(p))


@dataclass(frozen=True)
class SpreadEstimate:
    mean: float
    stderr: float
    sims: int
    n_seeds: int

    @property
    def mean_non_seed(self) -> float:
        return self.mean - self.n_seeds


@dataclass(frozen=True)
class ReductionEstimate:
    mean: float
    stderr: float
    sims: int
    paired: bool


def _chunks(total: int, n: int):
    size = max(1, _CHUNK_ENTRIES // max(n + 1, 1))
    for start in range(0, total, size):
        yield min(size, total - start)


def sample_choices(g: Graph, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` independent live-edge configurations of ``g``."""
    n = g.n
    if g.m == 0:
        return np.full((size, n), -1, dtype=np.int64)
    keys = g.in_sample_keys
    q = rng.random((size, n)) + 2.0 * np.arange(n)
    pos = np.searchsorted(keys, q, side="right")
    hit = pos < g.in_indptr[1:]
    return np.where(hit, g.in_order[np.minimum(pos, g.m - 1)], -1)


def reached(
    g: Graph,
    choice: np.ndarray,
    seeds_mask: np.ndarray,
    drop_nodes: np.ndarray | None = None,
    drop_edges: np.ndarray | None = None,
) -> np.ndarray:
    """Boolean ``(batch, n)`` mask of nodes reachable from the seeds.

    Each node follows its unique live in-edge backwards; a node is reached
    iff that chain ends at a seed. ``drop_nodes``/``drop_edges`` (boolean
    masks) delete elements from every configuration, which is the
    ``Gamma(L \\ A, S)`` coupling. Chains are resolved by pointer doubling.
    """
    n = g.n
    choice = np.atleast_2d(choice)
    batch = choice.shape[0]
    dtype = np.int32 if n < 2**31 - 1 else np.int64
    live = choice >= 0
    safe = np.where(live, choice, 0)
    if drop_edges is not None and g.m:
        live &= ~drop_edges[safe]
    parents = np.empty((batch, n + 1), dtype=dtype)
    parents[:, :n] = np.where(live, g.src[safe] if g.m else 0, n)
    parents[:, n] = n
    if drop_nodes is not None:
        parents[:, :n][:, drop_nodes] = n
    seed_ids = np.flatnonzero(seeds_mask)
    parents[:, seed_ids] = seed_ids
    rounds = max(1, math.ceil(math.log2(n + 1)))
    for _ in range(rounds):
        parents = np.take_along_axis(parents, parents, axis=1)
    is_seed = np.append(seeds_mask, False)
    return is_seed[parents[:, :n]]


def _attack_masks(g: Graph, attack: AttackSet):
    drop_nodes = np.zeros(g.n, dtype=bool)
    drop_nodes[list(attack.nodes)] = True
    drop_edges = np.zeros(g.m, dtype=bool)
    for u, v in attack.edges:
        drop_edges[g.edge_id(u, v)] = True
    return drop_nodes, drop_edges


# --------------------------------------------------------------------------
# Sampling and simulation


def sample_live_edge_graph(g: Graph, rng=None) -> LiveEdgeGraph:
    check_graph(g)
    rng = check_random_state(rng)
    return LiveEdgeGraph(g, sample_choices(g, rng, 1)[0])


def forward_simulate(g: Graph, seeds: Iterable[int], rng=None, semantics: str = "live-edge") -> set[int]:
    """One LT cascade from ``seeds``; returns the final active set.

    ``semantics="threshold"`` draws ``theta_v ~ U[0, 1]`` and activates a node
    once its active in-weight reaches the threshold; ``"live-edge"`` runs
    reachability on a sampled live-edge graph. Both give the same law.
    """
    check_graph(g)
    seeds = check_seeds(g, seeds)
    rng = check_random_state(rng)
    if semantics == "live-edge":
        mask = reached(g, sample_choices(g, rng, 1), seed_mask(g, seeds))[0]
        return set(np.flatnonzero(mask).tolist())
    if semantics == "threshold":
        return _threshold_cascade(g, seeds, rng.random(g.n))
    raise ValueError(f"unknown semantics {semantics!r}")


def _threshold_cascade(g: Graph, seeds: np.ndarray, theta: np.ndarray) -> set[int]:
    active = set(seeds.tolist())
    pressure = np.zeros(g.n)
    frontier = list(active)
    weight, dst, indptr = g.weight, g.dst, g.out_indptr
    while frontier:
        nxt = []
        for u in frontier:
            for e in range(indptr[u], indptr[u + 1]):
                v = int(dst[e])
                if v in active:
                    continue
                if weight[e] <= 0:
                    continue
                pressure[v] += weight[e]
                if pressure[v] >= theta[v]:
                    active.add(v)
                    nxt.append(v)
        frontier = nxt
    return active


def estimate_spread(
    g: Graph, seeds: Iterable[int], sims: int = DEFAULT_SIMS, rng=None, semantics: str = "live-edge"
) -> SpreadEstimate:
    """Monte Carlo estimate of the expected number of active nodes."""
    check_graph(g)
    seeds = check_seeds(g, seeds)
    rng = check_random_state(rng)
    if sims < 1:
        raise ValueError("sims must be >= 1")
    smask = seed_mask(g, seeds)
    if semantics == "threshold":
        counts = np.array([len(_threshold_cascade(g, seeds, rng.random(g.n))) for _ in range(sims)], float)
    elif semantics == "live-edge":
        counts = np.concatenate([
            reached(g, sample_choices(g, rng, b), smask).sum(axis=1) for b in _chunks(sims, g.n)
        ]).astype(float)
    else:
        raise ValueError(f"unknown semantics {semantics!r}")
    return SpreadEstimate(float(counts.mean()), _stderr(counts), sims, len(seeds))


def estimate_reduction(
    g: Graph,
    seeds: Iterable[int],
    attack: AttackSet,
    sims: int = DEFAULT_SIMS,
    paired: bool = True,
    rng=None,
) -> ReductionEstimate:
    """Monte Carlo estimate of ``sigma(S, G) - sigma(S, G \\ A)``.

    The paired estimator evaluates both graphs on the same live-edge sample,
    so every per-sample difference is non-negative.
    """
    check_graph(g)
    seeds = check_seeds(g, seeds)
    check_attack(g, seeds, attack)
    rng = check_random_state(rng)
    if sims < 1:
        raise ValueError("sims must be >= 1")
    if not paired:
        from .graph import remove_elements

        before = estimate_spread(g, seeds, sims, rng)
        after = estimate_spread(remove_elements(g, attack), seeds, sims, rng)
        return ReductionEstimate(
            before.mean - after.mean, math.hypot(before.stderr, after.stderr), sims, False
        )
    diffs = paired_reduction_samples(g, seeds, attack, sims, rng)
    return ReductionEstimate(float(diffs.mean()), _stderr(diffs), sims, True)


def paired_reduction_samples(g: Graph, seeds, attack: AttackSet, sims: int, rng) -> np.ndarray:
    """Per-sample ``|Gamma(L, S)| - |Gamma(L \\ A, S)|`` for ``sims`` draws of ``L``."""
    base, cut = paired_spread_samples(g, seeds, attack, sims, rng)
    return base - cut


def paired_spread_samples(g: Graph, seeds, attack: AttackSet, sims: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Active-node counts before and after the attack on shared live-edge samples."""
    seeds = check_seeds(g, seeds)
    smask = seed_mask(g, seeds)
    drop_nodes, drop_edges = _attack_masks(g, attack)
    base, cut = [], []
    for b in _chunks(sims, 2 * g.n):
        choice = sample_choices(g, rng, b)
        base.append(reached(g, choice, smask).sum(axis=1))
        cut.append(reached(g, choice, smask, drop_nodes, drop_edges).sum(axis=1))
    return np.concatenate(base).astype(float), np.concatenate(cut).astype(float)


def _stderr(x: np.ndarray) -> float:
    if len(x) < 2:
        return 0.0
    return float(x.std(ddof=1) / math.sqrt(len(x)))


# --------------------------------------------------------------------------
# Exact enumeration


class ExactOracle:
    """Brute-force expectations over every live-edge configuration of ``g``.

    Enumerates the ``prod_v (indeg(v) + 1)`` per-node in-edge choices rather
    than edge subsets. Configurations are materialised once when they fit in
    memory, so repeated queries on one graph are cheap.
    """

    def __init__(self, g: Graph, cap: int = ENUMERATION_CAP):
        check_graph(g)
        self.graph = g
        radix = g.in_degree + 1
        size = 1
        for r in radix.tolist():
            size *= r
            if size > cap:
                raise ValueError(f"enumeration needs more than {cap} configurations")
        self.size = size
        self._radix = radix
        self._cached = None
        if size * (g.n + 1) <= _CHUNK_ENTRIES:
            self._cached = [self._block(0, size)]

    def _block(self, start: int, stop: int):
        g = self.graph
        idx = np.arange(start, stop, dtype=np.int64)
        choice = np.empty((stop - start, g.n), dtype=np.int64)
        prob = np.ones(stop - start)
        none_mass = 1.0 - g.in_weight_sum
        for v in range(g.n):
            r = int(self._radix[v])
            opt = idx % r
            idx //= r
            edges = g.in_edges(v)
            table_edge = np.append(edges, -1)
            table_mass = np.append(g.weight[edges], none_mass[v])
            choice[:, v] = table_edge[opt]
            prob *= table_mass[opt]
        return choice, prob

    def blocks(self):
        if self._cached is not None:
            yield from self._cached
            return
        step = max(1, _CHUNK_ENTRIES // (self.graph.n + 1))
        for start in range(0, self.size, step):
            yield self._block(start, min(self.size, start + step))

    def spread(self, seeds: Iterable[int], attack: AttackSet | None = None) -> float:
        """``sigma(S, G \\ A)`` evaluated on the coupled configurations."""
        g = self.graph
        smask = seed_mask(g, check_seeds(g, seeds))
        drops = _attack_masks(g, attack) if attack else (None, None)
        return float(sum(prob @ reached(g, choice, smask, *drops).sum(axis=1) for choice, prob in self.blocks()))

    def reduction(self, seeds: Iterable[int], attack: AttackSet) -> float:
        return self.reductions(seeds, [attack])[0]

    def reductions(self, seeds: Iterable[int], attacks: list[AttackSet]) -> list[float]:
        """Exact ``rho_S(A)`` for each attack, sharing one pass over configurations."""
        g = self.graph
        seeds = check_seeds(g, seeds)
        for a in attacks:
            check_attack(g, seeds, a)
        smask = seed_mask(g, seeds)
        masks = [_attack_masks(g, a) for a in attacks]
        totals = np.zeros(len(attacks))
        for choice, prob in self.blocks():
            base = reached(g, choice, smask).sum(axis=1)
            for i, (dn, de) in enumerate(masks):
                totals[i] += prob @ (base - reached(g, choice, smask, dn, de).sum(axis=1))
        return totals.tolist()


def exact_spread(g: Graph, seeds: Iterable[int], cap: int = ENUMERATION_CAP) -> float:
    return ExactOracle(g, cap).spread(seeds)


def exact_reduction(g: Graph, seeds: Iterable[int], attack: AttackSet, cap: int = ENUMERATION_CAP) -> float:
    return ExactOracle(g, cap).reduction(seeds, attack)

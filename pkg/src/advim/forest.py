"""Forward-forest greedy attack with incremental subtree score updates.

Forests are stored densely, one row per forest: ``parent[i, v]`` is the node
that activated ``v`` in forest ``i`` (``-1`` if ``v`` is a seed or inactive),
``pedge[i, v]`` the corresponding live edge and ``size[i, v]`` the number of
non-seed nodes in the subtree rooted at ``v``. Removing node ``v`` or its
parent edge disconnects exactly ``size[i, v]`` nodes in forest ``i``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .attack import log_binom
from .base import BaseAttack
from .diffusion import reached, sample_choices
from .graph import AttackSet, Budgets, Graph
from .sampling import ForwardForest
from .validation import check_budgets, check_graph, check_random_state, check_seeds, seed_mask

DEFAULT_THETA = 10_000
DEFAULT_MEMORY_CAP = 2 * 2**30
_BYTES_PER_ENTRY = 12
_CHUNK_ENTRIES = 2**22


class MemoryCapError(MemoryError):
    """Forest storage would exceed the configured cap."""


def _subtree_sizes(parent: np.ndarray, smask: np.ndarray) -> np.ndarray:
    """Non-seed subtree sizes from parent pointers (rows are forests)."""
    rows, n = parent.shape
    size = (parent >= 0).astype(np.int32)
    flat_base = (np.arange(rows, dtype=np.int64) * n)[:, None]
    cur = parent.astype(np.int64)
    for _ in range(n):
        ok = cur >= 0
        ok[ok] = ~smask[cur[ok]]
        if not ok.any():
            break
        idx = (flat_base + cur)[ok]
        size += np.bincount(idx, minlength=rows * n).reshape(rows, n).astype(np.int32)
        nxt = np.full_like(cur, -1)
        r, c = np.nonzero(ok)
        nxt[r, c] = parent[r, cur[r, c]]
        cur = nxt
    return size


class ScoredForestSet:
    """``theta`` forward forests with global influence scores.

    ``node_scores[v]`` sums the subtree sizes of ``v`` over all forests;
    ``edge_scores[e]`` sums, for ``e = (u, v)``, the subtree size of ``v`` in
    the forests whose live edge into ``v`` is ``e``.
    """

    def __init__(self, graph: Graph, seeds: np.ndarray, parent, pedge, size):
        self.graph = graph
        self.seeds = seeds
        self.smask = seed_mask(graph, seeds)
        self.parent = parent
        self.pedge = pedge
        self.size = size
        self.node_scores, self.edge_scores = self.recompute_scores(from_sizes=True)

    @property
    def theta(self) -> int:
        return self.parent.shape[0]

    @property
    def nbytes(self) -> int:
        return self.parent.nbytes + self.pedge.nbytes + self.size.nbytes

    def copy(self) -> "ScoredForestSet":
        return ScoredForestSet(self.graph, self.seeds, self.parent.copy(), self.pedge.copy(), self.size.copy())

    def activated_total(self) -> int:
        return int((self.parent >= 0).sum())

    def recompute_scores(self, from_sizes: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Scores from the current forests; rebuilds subtree sizes unless ``from_sizes``."""
        size = self.size if from_sizes else _subtree_sizes(self.parent, self.smask)
        nodes = size.sum(axis=0, dtype=np.int64)
        live = self.pedge >= 0
        edges = np.bincount(self.pedge[live], weights=size[live], minlength=self.graph.m)
        return nodes, np.rint(edges).astype(np.int64)

    def forest(self, i: int) -> ForwardForest:
        g = self.graph
        parent, pedge, children = {}, {}, {}
        for v in np.flatnonzero(self.parent[i] >= 0).tolist():
            u = int(self.parent[i, v])
            parent[v], pedge[v] = u, int(self.pedge[i, v])
            children.setdefault(u, []).append(v)
        return ForwardForest(frozenset(self.seeds.tolist()), parent, pedge, children)

    def remove(self, a: int) -> int:
        """Delete element ``a`` (node id, or ``n + edge id``) from every forest.

        Returns the number of non-seed nodes disconnected.
        """
        g = self.graph
        n = g.n
        if a < n:
            r = a
            rows = np.flatnonzero(self.size[:, r] > 0)
        else:
            e = a - n
            r = int(g.dst[e])
            rows = np.flatnonzero(self.pedge[:, r] == e)
        if not len(rows):
            return 0
        par = self.parent[rows]
        size = self.size[rows]
        pe = self.pedge[rows]
        k = len(rows)

        # Subtree of r: activated nodes whose ancestor chain passes through r.
        # Walk only the (forest, node) pairs still climbing.
        pr, pv = np.nonzero(par >= 0)
        hit = pv == r
        live = np.flatnonzero(~hit)
        anc = pv[live]
        while len(live):
            anc = par[pr[live], anc]
            found = anc == r
            hit[live[found]] = True
            keep = (anc >= 0) & ~found
            live, anc = live[keep], anc[keep]
        ir, iv = pr[hit], pv[hit]
        sz = size[ir, iv]
        self.node_scores -= np.bincount(iv, weights=sz, minlength=n).astype(np.int64)
        if g.m:
            self.edge_scores -= np.bincount(pe[ir, iv], weights=sz, minlength=g.m).astype(np.int64)

        # Proper ancestors of r lose size(r).
        cut = size[:, r].astype(np.int64)
        y = par[:, r].astype(np.int64)
        row = np.arange(k)
        while True:
            ok = y >= 0
            ok[ok] = ~self.smask[y[ok]]
            if not ok.any():
                break
            rr, yy, cc = row[ok], y[ok], cut[ok]
            np.subtract.at(self.node_scores, yy, cc)
            np.subtract.at(self.edge_scores, pe[rr, yy], cc)
            size[rr, yy] -= cc.astype(size.dtype)
            y = np.full(k, -1, dtype=np.int64)
            y[rr] = par[rr, yy]

        par[ir, iv] = -1
        pe[ir, iv] = -1
        size[ir, iv] = 0
        self.parent[rows], self.pedge[rows], self.size[rows] = par, pe, size
        return int(cut.sum())


def forest_bytes(graph: Graph, theta: int) -> int:
    return theta * graph.n * _BYTES_PER_ENTRY


def build_scored_forests(
    graph: Graph, seeds, theta: int = DEFAULT_THETA, rng=None, memory_cap: int | None = DEFAULT_MEMORY_CAP
) -> ScoredForestSet:
    """Sample ``theta`` forward forests and score every node and edge."""
    g = check_graph(graph)
    seeds = check_seeds(g, seeds)
    rng = check_random_state(rng)
    if theta < 1:
        raise ValueError("theta must be >= 1")
    need = forest_bytes(g, theta)
    if memory_cap is not None and need > memory_cap:
        raise MemoryCapError(f"{theta} forests on {g.n} nodes need {need} bytes > cap {memory_cap}")
    smask = seed_mask(g, seeds)
    parent = np.empty((theta, g.n), dtype=np.int32)
    pedge = np.empty((theta, g.n), dtype=np.int32)
    step = max(1, _CHUNK_ENTRIES // (g.n + 1))
    for start in range(0, theta, step):
        stop = min(theta, start + step)
        choice = sample_choices(g, rng, stop - start)
        live = reached(g, choice, smask) & ~smask
        safe = np.maximum(choice, 0)
        parent[start:stop] = np.where(live, g.src[safe] if g.m else 0, -1)
        pedge[start:stop] = np.where(live, choice, -1)
    size = np.empty((theta, g.n), dtype=np.int32)
    for start in range(0, theta, step):
        stop = min(theta, start + step)
        size[start:stop] = _subtree_sizes(parent[start:stop], smask)
    return ScoredForestSet(g, seeds, parent, pedge, size)


def aaff_select(forests: ScoredForestSet, budgets: Budgets, inplace: bool = False) -> list[int]:
    """Greedy on forest scores; returns chosen element ids in pick order.

    Ties go to nodes before edges, then lower id. Stops when budgets run out
    or no element has a positive score.
    """
    f = forests if inplace else forests.copy()
    n = f.graph.n
    qn, qe = budgets.nodes, budgets.edges
    chosen = []
    while qn + qe > 0:
        scores = np.concatenate([np.where(f.smask, 0, f.node_scores), f.edge_scores])
        lo = 0 if qn > 0 else n
        hi = len(scores) if qe > 0 else n
        a = lo + int(np.argmax(scores[lo:hi]))
        if scores[a] <= 0:
            break
        f.remove(a)
        chosen.append(a)
        if a < n:
            qn -= 1
        else:
            qe -= 1
    return chosen


def theta_times_opt(graph: Graph, n_seeds: int, budgets: Budgets, epsilon: float, ell: float) -> float:
    """Forest count sufficient for the approximation guarantee, multiplied by OPT.

    ``3 n (alpha / 2 + beta)^2 / eps^2`` with
    ``alpha = sqrt(ell ln n^- + ln 2)`` and
    ``beta = sqrt((ln C(n^-, q_N) C(m, q_E) + ell ln n^- + ln 2) / 2)``.
    """
    n_minus = graph.n - n_seeds
    log_c = log_binom(n_minus, budgets.nodes) + log_binom(graph.m, budgets.edges)
    alpha = math.sqrt(ell * math.log(n_minus) + math.log(2))
    beta = math.sqrt(0.5 * (log_c + ell * math.log(n_minus) + math.log(2)))
    return 3 * graph.n * (0.5 * alpha + beta) ** 2 / epsilon**2


@dataclass
class ForestReport:
    theta: int
    forest_bytes: int
    est_reduction: float
    theta_times_opt: float
    wall_ms: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class ForwardForestAttack(BaseAttack):
    """Greedy attack scored on sampled forward forests.

    Parameters
    ----------
    node_budget, edge_budget : int
    theta : int
        Number of forests (default 10000).
    epsilon, ell : float
        Only used to report the forest count the guarantee would need.
    memory_cap : int or None
        Abort with :class:`MemoryCapError` if forests would exceed this many bytes.
    random_state : int, Generator or None
    """

    def __init__(
        self,
        node_budget=1,
        edge_budget=0,
        theta=DEFAULT_THETA,
        epsilon=0.1,
        ell=1.0,
        memory_cap=DEFAULT_MEMORY_CAP,
        random_state=None,
    ):
        self.node_budget = node_budget
        self.edge_budget = edge_budget
        self.theta = theta
        self.epsilon = epsilon
        self.ell = ell
        self.memory_cap = memory_cap
        self.random_state = random_state

    def fit(self, graph: Graph, seeds):
        t0 = time.perf_counter()
        graph = check_graph(graph)
        seeds = check_seeds(graph, seeds)
        budgets = check_budgets(graph, seeds, self.node_budget, self.edge_budget)
        forests = build_scored_forests(graph, seeds, self.theta, check_random_state(self.random_state), self.memory_cap)
        before = forests.activated_total()
        chosen = aaff_select(forests, budgets, inplace=True)
        self.attack_set_ = AttackSet.from_element_ids(graph, chosen)
        self.report_ = ForestReport(
            theta=self.theta,
            forest_bytes=forests.nbytes,
            est_reduction=(before - forests.activated_total()) / self.theta,
            theta_times_opt=theta_times_opt(graph, len(seeds), budgets, self.epsilon, self.ell),
            wall_ms=1000 * (time.perf_counter() - t0),
        )
        return self

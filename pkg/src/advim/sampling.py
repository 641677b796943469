"""Reverse-reachable path sampling.

Three samplers return paths from the valid-path subspace (reverse paths that
end at a seed):

* :class:`NaiveVRRSampler` draws uniform non-seed roots and rejects invalid
  reverse walks.
* :class:`ForwardBackwardSampler` samples a forward forest from the seeds and
  reads off the forest path to a uniformly chosen activated node.
* :class:`DagVRRSampler` walks backwards on a DAG along edges re-weighted by
  activation probabilities, so no path is ever rejected.

Paths are produced in batches (:class:`PathBatch`) by lock-step vectorized
walks; :class:`RRPath` is the per-path view.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .diffusion import _CHUNK_ENTRIES, reached, sample_choices
from .graph import Graph, _offset_prefix_sums, topological_layers
from .validation import check_graph, check_random_state, check_seeds, seed_mask

DEFAULT_MAX_ATTEMPTS = 10**6

SEED, NO_LIVE_EDGE, LOOP_BACK = 0, 1, 2
REASONS = {SEED: "seed", NO_LIVE_EDGE: "no-live-in-edge", LOOP_BACK: "loop-back"}


class SamplingError(RuntimeError):
    """A rejection loop exceeded its attempt budget."""


@dataclass(frozen=True)
class RRPath:
    """A reverse path ``root = u_0 <- u_1 <- ... <- u_j``.

    ``edges[i]`` is the graph edge ``(u_{i+1}, u_i)``.
    """

    root: int
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    edge_ids: tuple[int, ...]
    valid: bool
    reason: str

    def ve(self, seeds: Iterable[int]) -> tuple[frozenset[int], frozenset[tuple[int, int]]]:
        """Nodes and edges of the path, with seed nodes left out."""
        seeds = set(seeds)
        return frozenset(v for v in self.nodes if v not in seeds), frozenset(self.edges)


def tau(g: Graph) -> np.ndarray:
    """Work units of one reverse step from each node: ``ceil(log2(indeg + 1))``."""
    return np.ceil(np.log2(g.in_degree + 1.0)).astype(np.int64)


@dataclass
class PathBatch:
    """Rows are paths; ``nodes`` is ``-1`` padded, ``edges[:, i]`` joins columns ``i`` and ``i + 1``."""

    nodes: np.ndarray
    edges: np.ndarray
    length: np.ndarray
    reason: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.reason == SEED

    def __len__(self) -> int:
        return len(self.length)

    def select(self, rows) -> "PathBatch":
        return PathBatch(self.nodes[rows], self.edges[rows], self.length[rows], self.reason[rows])

    def path(self, g: Graph, i: int) -> RRPath:
        k = int(self.length[i])
        nodes = tuple(self.nodes[i, :k].tolist())
        eids = tuple(self.edges[i, : k - 1].tolist())
        return RRPath(
            root=nodes[0],
            nodes=nodes,
            edges=tuple(g.edge(e) for e in eids),
            edge_ids=eids,
            valid=bool(self.reason[i] == SEED),
            reason=REASONS[int(self.reason[i])],
        )

    def paths(self, g: Graph) -> list[RRPath]:
        return [self.path(g, i) for i in range(len(self))]

    def elements(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Flattened element ids of VE(P) for valid rows, with their row index.

        Nodes map to ``v`` and edges to ``n + edge_id``. The terminal seed of a
        valid path is its only seed node, so it alone is dropped.
        """
        rows = np.flatnonzero(self.valid)
        k = self.length[rows] - 1
        width = max(int(k.max()) if len(k) else 0, 0)
        cols = np.arange(width)
        mask = cols[None, :] < k[:, None]
        node_part = self.nodes[rows, :width][mask]
        edge_part = self.edges[rows, :width][mask] + n
        owner = np.broadcast_to(np.arange(len(rows))[:, None], mask.shape)[mask]
        return np.concatenate([node_part, edge_part]), np.concatenate([owner, owner])

    def work(self, tau_of: np.ndarray, smask: np.ndarray) -> np.ndarray:
        """``omega(P)``: summed step cost over non-seed nodes of each path."""
        safe = np.maximum(self.nodes, 0)
        cost = np.where((self.nodes >= 0) & ~smask[safe], tau_of[safe], 0)
        return cost.sum(axis=1)

    @staticmethod
    def concat(batches: list["PathBatch"]) -> "PathBatch":
        width = max((b.nodes.shape[1] for b in batches), default=1)

        def pad(a, w):
            out = np.full((a.shape[0], w), -1, dtype=np.int64)
            out[:, : a.shape[1]] = a
            return out

        return PathBatch(
            np.concatenate([pad(b.nodes, width) for b in batches]) if batches else np.full((0, 1), -1),
            np.concatenate([pad(b.edges, max(width - 1, 1)) for b in batches]) if batches else np.full((0, 1), -1),
            np.concatenate([b.length for b in batches]) if batches else np.zeros(0, np.int64),
            np.concatenate([b.reason for b in batches]) if batches else np.zeros(0, np.int8),
        )


@dataclass
class SamplerStats:
    paths_returned: int = 0
    attempts: int = 0
    forests: int = 0
    work: int = 0
    wall_time: float = 0.0

    def as_dict(self) -> dict:
        return {
            "paths_returned": self.paths_returned,
            "attempts": self.attempts,
            "forests": self.forests,
            "work": self.work,
            "wall_time": self.wall_time,
        }


def _reverse_walk(
    keys: np.ndarray,
    indptr: np.ndarray,
    order: np.ndarray,
    src: np.ndarray,
    fallback: np.ndarray | None,
    roots: np.ndarray,
    smask: np.ndarray,
    rng: np.random.Generator,
    detect_loops: bool,
) -> PathBatch:
    """Lock-step reverse walks from ``roots`` (none of which is a seed).

    A step from ``v`` draws ``2v + U[0, 1)`` against ``keys``; falling past
    ``v``'s block means no live in-edge. With ``fallback`` (DAG walks) a
    fall-through caused by rounding picks ``fallback[v]`` instead.
    """
    b = len(roots)
    cap = 8
    nodes = np.full((b, cap), -1, dtype=np.int64)
    edges = np.full((b, cap), -1, dtype=np.int64)
    nodes[:, 0] = roots
    length = np.ones(b, dtype=np.int64)
    reason = np.full(b, NO_LIVE_EDGE, dtype=np.int8)
    alive = np.arange(b)
    cur = roots.astype(np.int64)
    m = len(order)
    step = 0
    while len(alive):
        if step + 2 > cap:
            cap *= 2
            nodes = np.pad(nodes, ((0, 0), (0, cap - nodes.shape[1])), constant_values=-1)
            edges = np.pad(edges, ((0, 0), (0, cap - edges.shape[1])), constant_values=-1)
        if m == 0:
            break
        pos = np.searchsorted(keys, 2.0 * cur + rng.random(len(alive)), side="right")
        hit = pos < indptr[cur + 1]
        if fallback is not None:
            miss = ~hit
            pos[miss] = fallback[cur[miss]]
            hit = pos >= 0
        e = order[np.minimum(np.maximum(pos, 0), m - 1)]
        u = src[e]
        go = hit
        if detect_loops:
            loop = hit & (nodes[alive, : step + 1] == u[:, None]).any(axis=1)
            reason[alive[loop]] = LOOP_BACK
            go = hit & ~loop
        alive, cur, e = alive[go], u[go], e[go]
        step += 1
        nodes[alive, step] = cur
        edges[alive, step - 1] = e
        length[alive] += 1
        done = smask[cur]
        reason[alive[done]] = SEED
        alive, cur = alive[~done], cur[~done]
    return PathBatch(nodes[:, : length.max()], edges[:, : max(length.max() - 1, 1)], length, reason)


class _BatchSampler:
    """Shared batching loop; subclasses implement ``_draw`` returning a ``PathBatch``."""

    def __init__(self, graph: Graph, seeds, max_attempts: int = DEFAULT_MAX_ATTEMPTS):
        self.graph = check_graph(graph)
        self.seeds = check_seeds(graph, seeds)
        self.smask = seed_mask(graph, self.seeds)
        self.max_attempts = max_attempts
        self.stats = SamplerStats()
        self.tau = tau(graph)
        self._rate = 1.0
        # Valid draws seen, including surplus ones dropped from the last batch.
        self.valid_seen = 0

    @property
    def n_minus(self) -> int:
        return self.graph.n - len(self.seeds)

    def _draw(self, size: int, rng) -> tuple[PathBatch, int]:
        raise NotImplementedError

    def sample(self, count: int, rng=None) -> PathBatch:
        """Return exactly ``count`` valid paths."""
        rng = check_random_state(rng)
        t0 = time.perf_counter()
        got: list[PathBatch] = []
        have = 0
        dry = 0
        limit = max(1, _CHUNK_ENTRIES // (8 * (self._width_hint() + 1)))
        while have < count:
            need = count - have
            size = int(min(limit, max(16, math.ceil(1.1 * need / max(self._rate, 1e-6)))))
            batch, attempts = self._draw(size, rng)
            valid = np.flatnonzero(batch.valid)
            self.stats.attempts += attempts
            self.valid_seen += len(valid)
            self.stats.work += int(batch.work(self.tau, self.smask).sum())
            self._rate = 0.5 * self._rate + 0.5 * max(len(valid), 0.5) / attempts
            if len(valid) == 0:
                dry += attempts
                if dry >= self.max_attempts:
                    raise SamplingError(
                        f"no valid path in {dry} consecutive attempts; the seeds may reach no other node"
                    )
                continue
            dry = 0
            valid = valid[:need]
            got.append(batch.select(valid))
            have += len(valid)
        out = PathBatch.concat(got)
        self.stats.paths_returned += len(out)
        self.stats.wall_time += time.perf_counter() - t0
        return out

    def _width_hint(self) -> int:
        return 1

    def sample_path(self, rng=None) -> RRPath:
        return self.sample(1, rng).path(self.graph, 0)

    def estimate_sigma_minus(self) -> float:
        """Estimate of the expected number of activated non-seed nodes."""
        raise NotImplementedError


# --------------------------------------------------------------------------
# Naive rejection sampling


class NaiveVRRSampler(_BatchSampler):
    """Uniform non-seed roots, LT reverse walks, reject paths missing the seeds."""

    def __init__(self, graph: Graph, seeds, max_attempts: int = DEFAULT_MAX_ATTEMPTS):
        super().__init__(graph, seeds, max_attempts)
        if self.n_minus == 0:
            raise SamplingError("every node is a seed; there is nothing to sample")
        self._candidates = np.flatnonzero(~self.smask)

    def walk(self, roots: np.ndarray, rng) -> PathBatch:
        g = self.graph
        return _reverse_walk(
            g.in_sample_keys, g.in_indptr, g.in_order, g.src, None, np.asarray(roots), self.smask, rng, True
        )

    def _draw(self, size, rng):
        roots = self._candidates[rng.integers(0, len(self._candidates), size)]
        return self.walk(roots, rng), size

    def acceptance_rate(self) -> float:
        return self.valid_seen / max(self.stats.attempts, 1)

    def estimate_sigma_minus(self) -> float:
        return self.n_minus * self.acceptance_rate()


def sample_rr_path(g: Graph, root: int, seeds, rng=None) -> RRPath:
    """One LT reverse simulation from ``root``; the result may be invalid."""
    seeds = check_seeds(g, seeds)
    if root in set(seeds.tolist()):
        raise ValueError("root must not be a seed")
    rng = check_random_state(rng)
    return NaiveVRRSampler(g, seeds).walk(np.array([root]), rng).path(g, 0)


def naive_vrr(g: Graph, seeds, rng=None, max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> tuple[RRPath, int]:
    """Rejection-sample one valid path; returns it with the attempt count."""
    rng = check_random_state(rng)
    sampler = NaiveVRRSampler(g, seeds, max_attempts)
    candidates = sampler._candidates
    for attempt in range(1, max_attempts + 1):
        root = candidates[rng.integers(len(candidates))]
        path = sampler.walk(np.array([root]), rng).path(g, 0)
        if path.valid:
            return path, attempt
    raise SamplingError(f"no valid path in {max_attempts} attempts")


# --------------------------------------------------------------------------
# Forward forests and forward-backward sampling


@dataclass
class ForwardForest:
    """Activation forest of one live-edge sample, rooted at the seeds."""

    seeds: frozenset[int]
    parent: dict[int, int]
    parent_edge: dict[int, int]
    children: dict[int, list[int]] = field(default_factory=dict)

    @property
    def activated(self) -> frozenset[int]:
        return frozenset(self.parent)

    def path_to_root(self, v: int) -> list[int]:
        out = [v]
        while out[-1] in self.parent:
            out.append(self.parent[out[-1]])
        return out


def _forest_from_choice(g: Graph, choice: np.ndarray, live: np.ndarray, smask: np.ndarray) -> ForwardForest:
    parent, pedge, children = {}, {}, {}
    for v in np.flatnonzero(live & ~smask).tolist():
        e = int(choice[v])
        u = int(g.src[e])
        parent[v], pedge[v] = u, e
        children.setdefault(u, []).append(v)
    return ForwardForest(frozenset(np.flatnonzero(smask).tolist()), parent, pedge, children)


def sample_forward_forest(g: Graph, seeds, rng=None) -> ForwardForest:
    """Sample a live-edge graph and keep the part reachable from the seeds."""
    check_graph(g)
    seeds = check_seeds(g, seeds)
    rng = check_random_state(rng)
    smask = seed_mask(g, seeds)
    choice = sample_choices(g, rng, 1)
    return _forest_from_choice(g, choice[0], reached(g, choice, smask)[0], smask)


class ForwardBackwardSampler(_BatchSampler):
    """One forward forest per path; the root is uniform over its activated non-seeds.

    Forests that activate no non-seed node are resampled.
    """

    def __init__(self, graph: Graph, seeds, max_attempts: int = DEFAULT_MAX_ATTEMPTS):
        super().__init__(graph, seeds, max_attempts)
        self._activated_total = 0

    def _width_hint(self) -> int:
        return 4 * self.graph.n

    def _draw(self, size, rng):
        g = self.graph
        choice = sample_choices(g, rng, size)
        live = reached(g, choice, self.smask) & ~self.smask
        counts = live.sum(axis=1)
        self.stats.forests += size
        self._activated_total += int(counts.sum())
        ok = np.flatnonzero(counts > 0)
        pick = np.floor(rng.random(len(ok)) * counts[ok]).astype(np.int64)
        rank = np.cumsum(live[ok], axis=1)
        roots = np.argmax(rank > pick[:, None], axis=1)
        batch = _forest_paths(g, choice[ok], roots, self.smask)
        return batch, size

    def estimate_sigma_minus(self) -> float:
        return self._activated_total / max(self.stats.forests, 1)


def _forest_paths(g: Graph, choice: np.ndarray, roots: np.ndarray, smask: np.ndarray) -> PathBatch:
    """Follow live in-edges from ``roots`` up to the seeds (rows of ``choice``)."""
    b = len(roots)
    cols_n, cols_e = [roots.astype(np.int64)], []
    length = np.ones(b, dtype=np.int64)
    cur = roots.astype(np.int64)
    alive = np.arange(b)
    while len(alive):
        e = choice[alive, cur]
        u = g.src[e]
        nc = np.full(b, -1, dtype=np.int64)
        ec = np.full(b, -1, dtype=np.int64)
        nc[alive], ec[alive] = u, e
        cols_n.append(nc)
        cols_e.append(ec)
        length[alive] += 1
        keep = ~smask[u]
        alive, cur = alive[keep], u[keep]
    nodes = np.stack(cols_n, axis=1)
    edges = np.stack(cols_e, axis=1) if cols_e else np.full((b, 1), -1, dtype=np.int64)
    return PathBatch(nodes, edges, length, np.full(b, SEED, dtype=np.int8))


def fb_vrr(g: Graph, seeds, rng=None, max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> RRPath:
    sampler = ForwardBackwardSampler(g, seeds, max_attempts)
    return sampler.sample_path(rng)


# --------------------------------------------------------------------------
# DAG sampling


def compute_activation_probabilities(g: Graph, seeds) -> tuple[np.ndarray, float]:
    """Activation probability of every node on a DAG, plus ``sigma^-(S)``.

    One pass in topological order; seeds have probability one and their
    in-edges are ignored.
    """
    check_graph(g)
    seeds = check_seeds(g, seeds)
    layers = topological_layers(g)
    smask = seed_mask(g, seeds)
    level = np.empty(g.n, dtype=np.int64)
    for i, layer in enumerate(layers):
        level[layer] = i
    ap = smask.astype(float)
    useful = ~smask[g.dst]
    eids = np.flatnonzero(useful)
    eids = eids[np.argsort(level[g.dst[eids]], kind="stable")]
    bounds = np.searchsorted(level[g.dst[eids]], np.arange(len(layers) + 1))
    for i in range(1, len(layers)):
        es = eids[bounds[i]:bounds[i + 1]]
        if len(es):
            np.add.at(ap, g.dst[es], ap[g.src[es]] * g.weight[es])
    np.minimum(ap, 1.0, out=ap)
    return ap, float(ap[~smask].sum())


@dataclass
class DagModel:
    graph: Graph
    seeds: np.ndarray
    order: np.ndarray
    ap: np.ndarray
    sigma_minus: float
    root_nodes: np.ndarray
    root_cdf: np.ndarray
    step_mass: np.ndarray
    step_keys: np.ndarray
    fallback: np.ndarray

    def root_probabilities(self) -> dict[int, float]:
        p = np.diff(np.concatenate([[0.0], self.root_cdf]))
        return dict(zip(self.root_nodes.tolist(), p.tolist()))

    def step_probabilities(self, v: int) -> dict[int, float]:
        g = self.graph
        lo, hi = g.in_indptr[v], g.in_indptr[v + 1]
        return {
            int(g.src[g.in_order[j]]): float(self.step_mass[j])
            for j in range(lo, hi)
            if self.step_mass[j] > 0
        }


def build_dag_model(g: Graph, seeds) -> DagModel:
    """Precompute root and reverse-step distributions for DAG sampling.

    Roots are non-seed nodes with mass ``ap_v / sigma^-``; a step from ``v``
    picks in-neighbour ``u`` with mass ``ap_u * w(u, v) / ap_v``. Nodes with
    zero activation probability appear in neither distribution.
    """
    seeds = check_seeds(g, seeds)
    ap, sigma_minus = compute_activation_probabilities(g, seeds)
    if sigma_minus <= 0:
        raise SamplingError("the seeds activate no other node (sigma^- = 0)")
    smask = seed_mask(g, seeds)
    order = np.concatenate(topological_layers(g))
    roots = np.flatnonzero(~smask & (ap > 0))
    cdf = np.cumsum(ap[roots]) / sigma_minus
    cdf[-1] = 1.0

    io = g.in_order
    tgt, srcs = g.dst[io], g.src[io]
    raw = ap[srcs] * g.weight[io]
    denom = np.bincount(tgt, weights=raw, minlength=g.n)
    mass = np.where(denom[tgt] > 0, raw / np.where(denom[tgt] > 0, denom[tgt], 1.0), 0.0)
    keys = _offset_prefix_sums(tgt, mass, g.in_indptr) if g.m else np.empty(0)
    # Pin each block's upper end to 2v + 1 so a step never falls through.
    top = keys - 2.0 * tgt >= 1 - 1e-12
    keys[top] = 2.0 * tgt[top] + 1.0
    fallback = np.full(g.n, -1, dtype=np.int64)
    pos = np.flatnonzero(mass > 0)
    fallback[tgt[pos]] = pos  # last positive-mass slot per target wins
    return DagModel(g, seeds, order, ap, sigma_minus, roots, cdf, mass, keys, fallback)


class DagVRRSampler(_BatchSampler):
    """Re-weighted reverse walks on a DAG; every path is valid."""

    def __init__(self, graph_or_model, seeds=None, max_attempts: int = DEFAULT_MAX_ATTEMPTS):
        model = graph_or_model if isinstance(graph_or_model, DagModel) else build_dag_model(graph_or_model, seeds)
        super().__init__(model.graph, model.seeds, max_attempts)
        self.model = model

    def _draw(self, size, rng):
        m = self.model
        g = self.graph
        roots = m.root_nodes[np.minimum(np.searchsorted(m.root_cdf, rng.random(size), side="right"), len(m.root_nodes) - 1)]
        batch = _reverse_walk(m.step_keys, g.in_indptr, g.in_order, g.src, m.fallback, roots, self.smask, rng, False)
        return batch, size

    def estimate_sigma_minus(self) -> float:
        return self.model.sigma_minus


def dag_vrr(model: DagModel, rng=None) -> RRPath:
    return DagVRRSampler(model).sample_path(rng)


def extract_dag(g: Graph, seeds) -> Graph:
    """Seed-rooted DAG of ``g`` by maximum-probability path distances.

    Runs Dijkstra from the seed set with edge length ``-ln w`` (zero-weight
    edges ignored) and keeps ``(u, v)`` iff ``u`` was settled before ``v``.
    Settlement order sorts by ``d`` and breaks distance ties along the
    shortest-path tree, so weight-1 edges out of a seed survive and every
    reachable node keeps its tree parent. Nodes unreachable from the seeds
    lose all edges.
    """
    check_graph(g)
    seeds = check_seeds(g, seeds)
    dist = np.full(g.n, np.inf)
    dist[seeds] = 0.0
    heap = [(0.0, int(s)) for s in seeds]
    heapq.heapify(heap)
    indptr, dst, w = g.out_indptr, g.dst, g.weight
    with np.errstate(divide="ignore"):
        length = -np.log(w)
    rank = np.full(g.n, g.n, dtype=np.int64)
    settled = 0
    while heap:
        d, u = heapq.heappop(heap)
        if rank[u] < g.n:
            continue
        rank[u] = settled
        settled += 1
        for e in range(indptr[u], indptr[u + 1]):
            if w[e] <= 0:
                continue
            v = int(dst[e])
            nd = d + length[e]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    ru, rv = rank[g.src], rank[g.dst]
    keep = (ru < g.n) & (rv < g.n) & (w > 0) & (ru < rv)
    return Graph(g.n, g.src[keep], g.dst[keep], g.weight[keep], g.labels, g.removed)

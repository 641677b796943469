"""Directed LT influence graphs, attack sets and edge-list I/O."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Sequence

import numpy as np

# Slack for floating sums of incoming weights.
ADMISSIBILITY_TOL = 1e-9

DUPLICATE_POLICIES = ("reject", "keep-first", "sum-then-clamp")


class GraphFormatError(ValueError):
    """Raised for malformed edge-list or seed-set input."""


class AdmissibilityError(ValueError):
    """Raised when some node's incoming weights sum to more than one."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed graph with LT edge weights.

    Edges are stored sorted by ``(source, target)``; an edge's position in
    that order is its edge id. Weights are ``NaN`` until assigned.

    Nodes removed by :func:`remove_elements` keep their dense id (so seed ids
    and labels stay valid) but lose every incident edge; they are listed in
    ``removed``.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    labels: tuple[str, ...]
    removed: frozenset[int] = field(default_factory=frozenset)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Sequence[int]],
        weights: Sequence[float] | None = None,
        labels: Sequence[str] | None = None,
        duplicates: str = "reject",
        check: bool = True,
    ) -> "Graph":
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if weights is None:
            w = np.full(len(edges), np.nan)
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != (len(edges),):
                raise ValueError("weights must have one entry per edge")
        if labels is None:
            labels = [str(i) for i in range(n)]
        src, dst, w = _canonical_edges(n, edges[:, 0], edges[:, 1], w, duplicates)
        g = cls(n=n, src=src, dst=dst, weight=w, labels=tuple(labels))
        if len(g.labels) != n:
            raise ValueError("need exactly one label per node")
        if check and g.has_weights:
            check_admissible(g)
        return g

    @property
    def m(self) -> int:
        return len(self.src)

    @property
    def has_weights(self) -> bool:
        return not np.isnan(self.weight).any()

    @property
    def nodes(self) -> list[int]:
        return [v for v in range(self.n) if v not in self.removed]

    @cached_property
    def label_index(self) -> dict[str, int]:
        index = {label: i for i, label in enumerate(self.labels)}
        if len(index) != self.n:
            raise ValueError("node labels are not unique")
        return index

    @cached_property
    def out_indptr(self) -> np.ndarray:
        return np.searchsorted(self.src, np.arange(self.n + 1)).astype(np.int64)

    @cached_property
    def in_order(self) -> np.ndarray:
        """Edge ids sorted by target (stable; sources ascending per target)."""
        return np.argsort(self.dst, kind="stable")

    @cached_property
    def in_indptr(self) -> np.ndarray:
        return np.searchsorted(self.dst[self.in_order], np.arange(self.n + 1)).astype(np.int64)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    @cached_property
    def in_weight_sum(self) -> np.ndarray:
        return np.bincount(self.dst, weights=self.weight, minlength=self.n)

    @cached_property
    def in_sample_keys(self) -> np.ndarray:
        """Per-target prefix sums of in-weights, offset by ``2 * target``.

        Aligned with ``in_order``. A draw ``2 * v + r`` with ``r ~ U[0, 1)``
        lands in ``v``'s block with the probabilities ``w(u, v)`` and falls
        past it with probability ``1 - sum_u w(u, v)``.
        """
        return _offset_prefix_sums(self.dst[self.in_order], self.weight[self.in_order], self.in_indptr)

    def in_edges(self, v: int) -> np.ndarray:
        return self.in_order[self.in_indptr[v]:self.in_indptr[v + 1]]

    def out_edges(self, v: int) -> np.ndarray:
        return np.arange(self.out_indptr[v], self.out_indptr[v + 1])

    def edge_id(self, u: int, v: int) -> int:
        """Dense id of edge ``(u, v)``; ``KeyError`` if absent."""
        lo, hi = self.out_indptr[u], self.out_indptr[u + 1]
        j = lo + int(np.searchsorted(self.dst[lo:hi], v))
        if j < hi and self.dst[j] == v:
            return int(j)
        raise KeyError((u, v))

    def edge(self, e: int) -> tuple[int, int]:
        return int(self.src[e]), int(self.dst[e])

    def edge_list(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def with_weights(self, weight: np.ndarray) -> "Graph":
        g = Graph(self.n, self.src, self.dst, np.asarray(weight, dtype=float), self.labels, self.removed)
        check_admissible(g)
        return g

    def is_acyclic(self) -> bool:
        try:
            topological_layers(self)
        except ValueError:
            return False
        return True

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m}, weighted={self.has_weights})"


def _canonical_edges(n, src, dst, w, duplicates):
    """Sort edges by (src, dst), resolve duplicates, reject self-loops."""
    if duplicates not in DUPLICATE_POLICIES:
        raise ValueError(f"unknown duplicate policy {duplicates!r}")
    if len(src) and (src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n):
        raise ValueError("edge endpoint out of range")
    loops = src == dst
    if loops.any():
        i = int(np.flatnonzero(loops)[0])
        raise GraphFormatError(f"self-loop at node {int(src[i])}")
    key = src * n + dst
    order = np.argsort(key, kind="stable")
    key, src, dst, w = key[order], src[order], dst[order], w[order]
    first = np.ones(len(key), dtype=bool)
    first[1:] = key[1:] != key[:-1]
    if not first.all():
        if duplicates == "reject":
            i = int(np.flatnonzero(~first)[0])
            raise GraphFormatError(f"duplicate edge ({int(src[i])}, {int(dst[i])})")
        if duplicates == "sum-then-clamp" and not np.isnan(w).all():
            group = np.cumsum(first) - 1
            summed = np.bincount(group, weights=np.nan_to_num(w))
            w = np.minimum(summed, 1.0)
        else:
            w = w[first]
        src, dst = src[first], dst[first]
    return src, dst, np.asarray(w, dtype=float)


def check_admissible(g: Graph) -> None:
    """Raise :class:`AdmissibilityError` unless every incoming sum is <= 1."""
    if not g.has_weights:
        raise ValueError("graph has unset weights; call assign_weights first")
    if g.m and (g.weight.min() < 0 or g.weight.max() > 1):
        raise AdmissibilityError("edge weights must lie in [0, 1]")
    sums = np.bincount(g.dst, weights=g.weight, minlength=g.n)
    bad = np.flatnonzero(sums > 1 + ADMISSIBILITY_TOL)
    if len(bad):
        v = int(bad[0])
        raise AdmissibilityError(
            f"incoming weight sum {sums[v]:.6g} > 1 at node {g.labels[v]!r}"
        )


def topological_layers(g: Graph) -> list[np.ndarray]:
    """Kahn layering; raises ``ValueError`` if ``g`` has a cycle."""
    indeg = g.in_degree.copy()
    frontier = np.flatnonzero(indeg == 0)
    layers = []
    seen = 0
    while len(frontier):
        layers.append(frontier)
        seen += len(frontier)
        out = _gather_ranges(g.out_indptr, frontier)
        if not len(out):
            break
        targets = g.dst[out]
        dec = np.bincount(targets, minlength=g.n)
        hit = np.flatnonzero(dec)
        indeg[hit] -= dec[hit]
        frontier = hit[indeg[hit] == 0]
    if seen != g.n:
        raise ValueError("graph contains a cycle")
    return layers


def _offset_prefix_sums(groups: np.ndarray, mass: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    """Prefix sums of ``mass`` restarted per group, plus ``2 * group``.

    ``groups`` must be sorted and ``indptr`` its CSR pointer.
    """
    if not len(mass):
        return np.empty(0)
    total = np.cumsum(mass)
    starts = indptr[groups]
    base = np.where(starts > 0, total[np.maximum(starts - 1, 0)], 0.0)
    return 2.0 * groups + (total - base)


def _gather_ranges(indptr: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Concatenate ``arange(indptr[r], indptr[r+1])`` over ``rows``."""
    starts = indptr[rows]
    lens = indptr[rows + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(starts - np.cumsum(lens) + lens, lens)
    return offsets + np.arange(total)


# --------------------------------------------------------------------------
# Seeds, attack sets, budgets


def n_minus(g: Graph, seeds: Iterable[int]) -> int:
    """Number of non-seed nodes."""
    return g.n - len(set(seeds))


@dataclass(frozen=True)
class AttackSet:
    """Nodes and directed edges ``(u, v)`` to delete from a graph."""

    nodes: frozenset[int] = frozenset()
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(int(v) for v in self.nodes))
        object.__setattr__(self, "edges", frozenset((int(u), int(v)) for u, v in self.edges))

    def __len__(self) -> int:
        return len(self.nodes) + len(self.edges)

    def __or__(self, other: "AttackSet") -> "AttackSet":
        return AttackSet(self.nodes | other.nodes, self.edges | other.edges)

    def issubset(self, other: "AttackSet") -> bool:
        return self.nodes <= other.nodes and self.edges <= other.edges

    def validate(self, g: Graph, seeds: Iterable[int] | None = None) -> None:
        for v in self.nodes:
            if not 0 <= v < g.n or v in g.removed:
                raise ValueError(f"attack node {v} not in graph")
        for u, v in self.edges:
            try:
                g.edge_id(u, v)
            except (KeyError, IndexError):
                raise ValueError(f"attack edge ({u}, {v}) not in graph") from None
        if seeds is not None:
            hit = self.nodes & set(seeds)
            if hit:
                raise ValueError(f"attack set contains seed node(s) {sorted(hit)}")

    def element_ids(self, g: Graph) -> list[int]:
        """Encode as element ids: node ``v`` -> ``v``, edge ``e`` -> ``n + e``."""
        return sorted(self.nodes) + sorted(g.n + g.edge_id(u, v) for u, v in self.edges)

    @classmethod
    def from_element_ids(cls, g: Graph, ids: Iterable[int]) -> "AttackSet":
        nodes, edges = [], []
        for a in ids:
            a = int(a)
            if a < g.n:
                nodes.append(a)
            else:
                edges.append(g.edge(a - g.n))
        return cls(frozenset(nodes), frozenset(edges))

    def to_labels(self, g: Graph) -> dict:
        return {
            "nodes": sorted(g.labels[v] for v in self.nodes),
            "edges": sorted((g.labels[u], g.labels[v]) for u, v in self.edges),
        }


@dataclass(frozen=True)
class Budgets:
    nodes: int
    edges: int

    def clamped(self, n_candidates: int, m: int) -> "Budgets":
        """Clip budgets to the available candidates, warning when clipping."""
        if self.nodes < 0 or self.edges < 0:
            raise ValueError("budgets must be non-negative")
        qn, qe = self.nodes, self.edges
        if qn > n_candidates:
            warnings.warn(f"node budget {qn} clamped to {n_candidates}", stacklevel=2)
            qn = n_candidates
        if qe > m:
            warnings.warn(f"edge budget {qe} clamped to {m}", stacklevel=2)
            qe = m
        if qn + qe < 1:
            raise ValueError("need a positive node or edge budget")
        return Budgets(qn, qe)


# --------------------------------------------------------------------------
# Weights and removal


def assign_weights(g: Graph, scheme: str = "weighted-cascade", p: float | None = None) -> Graph:
    """Return a copy of ``g`` with LT weights.

    ``weighted-cascade`` sets ``w(u, v) = 1 / indeg(v)``. ``uniform`` sets
    every weight to ``p`` and rescales any node whose incoming sum would
    exceed one so that it sums to exactly one. ``explicit`` only validates
    the weights already present.
    """
    if scheme == "weighted-cascade":
        w = 1.0 / g.in_degree[g.dst] if g.m else np.empty(0)
    elif scheme == "uniform":
        if p is None or not 0 < p <= 1:
            raise ValueError("uniform weights need p in (0, 1]")
        deg = g.in_degree[g.dst].astype(float)
        w = np.where(p * deg > 1, 1.0 / np.maximum(deg, 1.0), p)
    elif scheme == "explicit":
        if not g.has_weights:
            raise ValueError("explicit scheme requires every edge weight to be set")
        w = g.weight
    else:
        raise ValueError(f"unknown weight scheme {scheme!r}")
    return g.with_weights(w)


def parse_weight_scheme(text: str) -> tuple[str, float | None]:
    """Parse ``weighted-cascade``, ``explicit`` or ``uniform(0.1)``/``uniform:0.1``."""
    text = text.strip()
    if text.startswith("uniform"):
        arg = text[len("uniform"):].strip("():= ")
        return "uniform", float(arg)
    return text, None


def remove_elements(g: Graph, attack: AttackSet) -> Graph:
    """Return ``G \\ A``; surviving edge weights are left unchanged."""
    attack.validate(g)
    drop = np.zeros(g.m, dtype=bool)
    if attack.nodes:
        gone = np.zeros(g.n, dtype=bool)
        gone[list(attack.nodes)] = True
        drop |= gone[g.src] | gone[g.dst]
    for u, v in attack.edges:
        drop[g.edge_id(u, v)] = True
    keep = ~drop
    return Graph(
        n=g.n,
        src=g.src[keep],
        dst=g.dst[keep],
        weight=g.weight[keep],
        labels=g.labels,
        removed=g.removed | attack.nodes,
    )


# --------------------------------------------------------------------------
# Text formats


def _lines(source) -> Iterable[str]:
    if isinstance(source, (bytes, bytearray)):
        source = source.decode()
    if isinstance(source, str):
        return source.splitlines()
    return (line.decode() if isinstance(line, bytes) else line for line in source)


def load_edge_list(source: str | bytes | IO, duplicates: str = "reject") -> Graph:
    """Parse ``source target [weight]`` lines into a :class:`Graph`.

    Lines starting with ``#`` and blank lines are skipped. Dense ids follow
    first appearance. Either every line carries a weight or none does.
    """
    index: dict[str, int] = {}
    labels: list[str] = []
    edges: list[tuple[int, int]] = []
    weights: list[float] = []
    weighted = None
    for lineno, line in enumerate(_lines(source), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 2 or 3 tokens, got {len(tokens)}")
        has_w = len(tokens) == 3
        if weighted is None:
            weighted = has_w
        elif weighted != has_w:
            raise GraphFormatError(f"line {lineno}: mixed weighted and unweighted lines")
        ids = []
        for tok in tokens[:2]:
            if tok not in index:
                index[tok] = len(labels)
                labels.append(tok)
            ids.append(index[tok])
        edges.append((ids[0], ids[1]))
        if has_w:
            try:
                w = float(tokens[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: non-numeric weight {tokens[2]!r}") from None
            if not 0 <= w <= 1 or math.isnan(w):
                raise GraphFormatError(f"line {lineno}: weight {w} outside [0, 1]")
            weights.append(w)
    return Graph.from_edges(
        len(labels), edges, weights if weighted else None, labels, duplicates=duplicates
    )


def write_edge_list(g: Graph, sink: IO, weights: bool = True) -> None:
    for (u, v), w in zip(g.edge_list(), g.weight.tolist()):
        if weights and not math.isnan(w):
            sink.write(f"{g.labels[u]} {g.labels[v]} {w:.17g}\n")
        else:
            sink.write(f"{g.labels[u]} {g.labels[v]}\n")


def load_seed_set(g: Graph, source: str | bytes | IO) -> list[int]:
    """Read one node label per line (``#`` comments allowed)."""
    seeds = []
    for lineno, line in enumerate(_lines(source), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line not in g.label_index:
            raise GraphFormatError(f"line {lineno}: unknown seed label {line!r}")
        seeds.append(g.label_index[line])
    if not seeds:
        raise GraphFormatError("seed set is empty")
    return sorted(set(seeds))

"""Reverse-sampling attack optimizer: sample-size calibration and max-cover greedy."""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln

from .base import BaseAttack
from .graph import AttackSet, Budgets, Graph
from .sampling import (
    DEFAULT_MAX_ATTEMPTS,
    DagVRRSampler,
    ForwardBackwardSampler,
    NaiveVRRSampler,
    PathBatch,
    SamplingError,
    build_dag_model,
    extract_dag,
)
from .validation import check_budgets, check_graph, check_random_state, check_seeds

SAMPLERS = ("naive", "fb", "dag")


_DIRECT_BINOM_TERMS = 100_000


def log_binom(n: int, k: int) -> float:
    """``ln C(n, k)`` without forming the integer."""
    if k < 0 or k > n:
        raise ValueError(f"C({n}, {k}) is zero")
    k = min(k, n - k)
    if k == 0:
        return 0.0
    if k <= _DIRECT_BINOM_TERMS:
        # product form: no large lgamma values to cancel
        i = np.arange(1, k + 1, dtype=float)
        return math.fsum(np.log((n - k + i) / i))
    return float(-math.log(n + 1) - betaln(n - k + 1, k + 1))


def _check_lambda_args(n_minus, m, q_nodes, q_edges):
    if n_minus < 1 or m < 0:
        raise ValueError("need n_minus >= 1 and m >= 0")
    if q_nodes < 0 or q_edges < 0 or q_nodes + q_edges < 1:
        raise ValueError("budgets must be non-negative and not both zero")
    if q_nodes > n_minus or q_edges > m:
        raise ValueError("budget exceeds the number of candidates")


def lambda_prime(n_minus: int, m: int, q_nodes: int, q_edges: int, eps_prime: float, ell: float) -> float:
    """Phase-1 sample constant; ``theta_i = lambda' / x_i``."""
    _check_lambda_args(n_minus, m, q_nodes, q_edges)
    if n_minus < 2:
        raise ValueError("lambda' needs n_minus >= 2 (it contains ln log2 n_minus)")
    log_c = log_binom(n_minus, q_nodes) + log_binom(m, q_edges)
    inner = log_c + ell * math.log(n_minus) + math.log(math.log2(n_minus))
    return (2 + 2 * eps_prime / 3) * inner * n_minus / eps_prime**2


def lambda_star(n: int, n_minus: int, m: int, q_nodes: int, q_edges: int, eps: float, ell: float) -> float:
    """Final sample constant; ``theta = lambda* / LB``."""
    _check_lambda_args(n_minus, m, q_nodes, q_edges)
    log_c = log_binom(n_minus, q_nodes) + log_binom(m, q_edges)
    alpha = math.sqrt(ell * math.log(n) + math.log(2))
    beta = math.sqrt(0.5 * (log_c + alpha**2))
    return 2 * n * (0.5 * alpha + beta) ** 2 / eps**2


def adjusted_ell(n: int, n_minus: int, m: int, q_nodes: int, q_edges: int, eps: float, ell: float) -> float:
    """Confidence exponent after the union-bound correction.

    The smallest ``gamma`` with ``ceil(lambda*(ell)) / n**(ell + gamma) <= 1 / n**ell``
    is ``ln ceil(lambda*(ell)) / ln n``; then ``ell + gamma + ln 2 / ln n_minus``.
    """
    lam = lambda_star(n, n_minus, m, q_nodes, q_edges, eps, ell)
    gamma = math.log(math.ceil(lam)) / math.log(n)
    # n_minus = 1 would make ln n_minus vanish; the single-candidate case needs no correction.
    return ell + gamma + math.log(2) / math.log(max(n_minus, 2))


# --------------------------------------------------------------------------
# Path collection and greedy max cover


class PathCollection:
    """Growing multiset of valid paths, indexed by the elements they contain.

    Elements are node ids ``v`` and edge ids ``n + e``; seeds are never indexed.
    """

    def __init__(self, n: int, m: int):
        self.n, self.m = n, m
        self._elements: list[np.ndarray] = []
        self._owners: list[np.ndarray] = []
        self.size = 0
        self._index = None

    def __len__(self) -> int:
        return self.size

    def add(self, batch: PathBatch) -> None:
        elems, owner = batch.elements(self.n)
        self._elements.append(elems.astype(np.int64))
        self._owners.append(owner.astype(np.int64) + self.size)
        self.size += int(batch.valid.sum())
        self._index = None

    @classmethod
    def from_sets(cls, n: int, m: int, paths: list[list[int]]) -> "PathCollection":
        """Build directly from per-path element id lists."""
        c = cls(n, m)
        c._elements = [np.array([a for p in paths for a in p], dtype=np.int64)]
        c._owners = [np.array([i for i, p in enumerate(paths) for _ in p], dtype=np.int64)]
        c.size = len(paths)
        return c

    def index(self):
        """CSR maps element -> paths and path -> elements."""
        if self._index is None:
            elems = np.concatenate(self._elements) if self._elements else np.zeros(0, np.int64)
            owners = np.concatenate(self._owners) if self._owners else np.zeros(0, np.int64)
            by_elem = np.argsort(elems, kind="stable")
            e_ptr = np.searchsorted(elems[by_elem], np.arange(self.n + self.m + 1))
            by_path = np.argsort(owners, kind="stable")
            p_ptr = np.searchsorted(owners[by_path], np.arange(self.size + 1))
            self._index = (e_ptr, owners[by_elem], p_ptr, elems[by_path])
        return self._index

    def counts(self) -> np.ndarray:
        e_ptr = self.index()[0]
        return np.diff(e_ptr)

    def paths_of(self, a: int) -> np.ndarray:
        e_ptr, e_paths, _, _ = self.index()
        return e_paths[e_ptr[a]:e_ptr[a + 1]]

    def elements_of(self, p: int) -> np.ndarray:
        _, _, p_ptr, p_elems = self.index()
        return p_elems[p_ptr[p]:p_ptr[p + 1]]

    def coverage(self, ids) -> float:
        """Fraction of paths intersecting the element set."""
        if self.size == 0:
            raise ValueError("empty path collection")
        hit = np.zeros(self.size, dtype=bool)
        for a in ids:
            hit[self.paths_of(int(a))] = True
        return float(hit.mean())


def node_edge_selection(
    collection: PathCollection, budgets: Budgets, method: str = "incremental"
) -> tuple[list[int], float]:
    """Greedy max cover under separate node and edge caps.

    Each round takes the element of largest marginal coverage among the
    partitions with budget left; ties go to nodes before edges, then lower
    id (edge ids follow ``(source, target)`` order). Elements with zero gain
    are never taken. ``method="incremental"`` keeps exact gains by
    decrementing them as paths become covered; ``"lazy"`` re-evaluates stale
    heap bounds. Both return the same selection.
    """
    if len(collection) == 0:
        raise ValueError("empty path collection")
    if method == "incremental":
        chosen = _greedy_incremental(collection, budgets)
    elif method == "lazy":
        chosen = _greedy_lazy(collection, budgets)
    else:
        raise ValueError(f"unknown method {method!r}")
    return chosen, collection.coverage(chosen)


def _greedy_incremental(c: PathCollection, budgets: Budgets) -> list[int]:
    e_ptr, e_paths, p_ptr, p_elems = c.index()
    gain = np.diff(e_ptr).astype(np.int64)
    covered = np.zeros(c.size, dtype=bool)
    left = {"node": budgets.nodes, "edge": budgets.edges}
    n = c.n
    chosen = []
    while left["node"] + left["edge"] > 0:
        lo = 0 if left["node"] > 0 else n
        hi = n + c.m if left["edge"] > 0 else n
        a = lo + int(np.argmax(gain[lo:hi]))
        if gain[a] <= 0:
            break
        chosen.append(a)
        left["node" if a < n else "edge"] -= 1
        paths = e_paths[e_ptr[a]:e_ptr[a + 1]]
        fresh = paths[~covered[paths]]
        covered[fresh] = True
        starts, ends = p_ptr[fresh], p_ptr[fresh + 1]
        if len(fresh):
            idx = np.repeat(starts - np.cumsum(ends - starts) + (ends - starts), ends - starts)
            touched = p_elems[idx + np.arange(len(idx))]
            np.subtract.at(gain, touched, 1)
    return chosen


def _greedy_lazy(c: PathCollection, budgets: Budgets) -> list[int]:
    e_ptr, e_paths, _, _ = c.index()
    n = c.n
    covered = np.zeros(c.size, dtype=bool)
    counts = np.diff(e_ptr)
    heap = [(-int(k), a) for a, k in enumerate(counts) if k > 0]
    heapq.heapify(heap)
    left = {"node": budgets.nodes, "edge": budgets.edges}
    chosen = []
    while heap and left["node"] + left["edge"] > 0:
        neg, a = heapq.heappop(heap)
        if left["node" if a < n else "edge"] == 0:
            continue
        paths = e_paths[e_ptr[a]:e_ptr[a + 1]]
        fresh = int((~covered[paths]).sum())
        if fresh == 0:
            continue
        if heap and (-fresh, a) > heap[0]:
            heapq.heappush(heap, (-fresh, a))
            continue
        chosen.append(a)
        left["node" if a < n else "edge"] -= 1
        covered[paths] = True
    return chosen


# --------------------------------------------------------------------------
# AAIMM


@dataclass
class AttackReport:
    theta: float
    paths_sampled: int
    lb: float
    epsilon: float
    ell: float
    ell_adjusted: float
    sampler: str
    coverage: float
    est_reduction: float
    scaled_objective: float
    sigma_minus: float
    wall_ms: float
    dag_extracted: bool = False
    regime: str = "1/2-eps"
    sampler_stats: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "sampler_stats"}
        d.update({f"stat_{k}": v for k, v in self.sampler_stats.items()})
        return d

    def to_text(self) -> str:
        """Flat ``key=value`` lines."""
        return "".join(f"{k}={v}\n" for k, v in self.as_dict().items())


class _EdgeIdRemap:
    """Sampler on an extracted DAG whose path edge ids are rewritten to the source graph's."""

    def __init__(self, source, graph: Graph, dag: Graph):
        self.source = source
        order = np.argsort(graph.src * graph.n + graph.dst)
        codes = (graph.src * graph.n + graph.dst)[order]
        self.to_graph = order[np.searchsorted(codes, dag.src * dag.n + dag.dst)]

    @property
    def stats(self):
        return self.source.stats

    def estimate_sigma_minus(self) -> float:
        return self.source.estimate_sigma_minus()

    def sample(self, count: int, rng=None) -> PathBatch:
        b = self.source.sample(count, rng)
        edges = np.where(b.edges >= 0, self.to_graph[np.maximum(b.edges, 0)], b.edges)
        return PathBatch(b.nodes, edges, b.length, b.reason)


def make_sampler(graph: Graph, seeds, sampler: str, max_attempts: int = DEFAULT_MAX_ATTEMPTS):
    """Return ``(sampler, dag_extracted)``; non-DAGs are reduced by ``extract_dag`` for ``"dag"``."""
    if sampler == "naive":
        return NaiveVRRSampler(graph, seeds, max_attempts), False
    if sampler == "fb":
        return ForwardBackwardSampler(graph, seeds, max_attempts), False
    if sampler == "dag":
        extracted = not graph.is_acyclic()
        dag = extract_dag(graph, seeds) if extracted else graph
        try:
            model = build_dag_model(dag, seeds)
        except SamplingError:
            raise SamplingError("the seeds activate no other node (sigma^- = 0)") from None
        source = DagVRRSampler(model, max_attempts=max_attempts)
        return (_EdgeIdRemap(source, graph, dag) if extracted else source), extracted
    raise ValueError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")


def aaimm_attack(
    graph: Graph,
    seeds,
    budgets: Budgets,
    epsilon: float = 0.1,
    ell: float = 1.0,
    sampler: str = "dag",
    rng=None,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    greedy: str = "incremental",
) -> tuple[AttackSet, AttackReport]:
    """Reverse-sampling attack with a ``(1/2 - eps)`` guarantee w.p. ``1 - n^-ell``.

    Phase 1 doubles a guess ``x_i = n^- / 2^i`` of the optimum until the
    greedy cover certifies it, giving a lower bound ``LB``; the collection is
    topped up to ``lambda* / LB`` paths and the final greedy cover is returned.
    The collection only ever grows.
    """
    t0 = time.perf_counter()
    g = check_graph(graph)
    seeds = check_seeds(g, seeds)
    rng = check_random_state(rng)
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if ell <= 0:
        raise ValueError("ell must be positive")
    n, m = g.n, g.m
    n_minus = n - len(seeds)
    budgets = Budgets(budgets.nodes, budgets.edges).clamped(n_minus, m)
    qn, qe = budgets.nodes, budgets.edges
    source, extracted = make_sampler(g, seeds, sampler, max_attempts)

    eps_prime = math.sqrt(2) * epsilon
    ell_adj = adjusted_ell(n, n_minus, m, qn, qe, epsilon, ell)
    paths = PathCollection(n, m)

    def top_up(target):
        need = int(math.ceil(target)) - len(paths)
        if need > 0:
            paths.add(source.sample(need, rng))

    lb = 1.0
    for i in range(1, int(math.floor(math.log2(n_minus))) + 1):
        x = n_minus / 2**i
        top_up(lambda_prime(n_minus, m, qn, qe, eps_prime, ell_adj) / x)
        chosen, cov = node_edge_selection(paths, budgets, greedy)
        if n_minus * cov >= (1 + eps_prime) * x:
            lb = n_minus * cov / (1 + eps_prime)
            break
    theta = lambda_star(n, n_minus, m, qn, qe, epsilon, ell_adj) / lb
    # Phase 2 samples while |R| <= theta.
    top_up(math.floor(theta) + 1)
    chosen, cov = node_edge_selection(paths, budgets, greedy)

    sigma_minus = source.estimate_sigma_minus()
    report = AttackReport(
        theta=theta,
        paths_sampled=len(paths),
        lb=lb,
        epsilon=epsilon,
        ell=ell,
        ell_adjusted=ell_adj,
        sampler=sampler,
        coverage=cov,
        est_reduction=sigma_minus * cov,
        scaled_objective=n_minus * cov,
        sigma_minus=sigma_minus,
        wall_ms=1000 * (time.perf_counter() - t0),
        dag_extracted=extracted,
        regime="1-1/e-eps" if qn == 0 or qe == 0 else "1/2-eps",
        sampler_stats=source.stats.as_dict(),
    )
    return AttackSet.from_element_ids(g, chosen), report


class AAIMMAttack(BaseAttack):
    """Budgeted node+edge attack on LT influence via valid reverse paths.

    Parameters
    ----------
    node_budget, edge_budget : int
        Maximum number of non-seed nodes and of edges to delete.
    epsilon, ell : float
        Accuracy and confidence parameters of the guarantee.
    sampler : {"dag", "naive", "fb"}
        Valid-path sampler. ``"dag"`` runs on a seed-rooted DAG extracted
        from cyclic inputs.
    max_attempts : int
        Consecutive rejected draws tolerated before giving up.
    random_state : int, Generator or None

    Attributes
    ----------
    attack_set_ : AttackSet
    report_ : AttackReport
    """

    def __init__(
        self,
        node_budget=1,
        edge_budget=0,
        epsilon=0.1,
        ell=1.0,
        sampler="dag",
        max_attempts=DEFAULT_MAX_ATTEMPTS,
        random_state=None,
    ):
        self.node_budget = node_budget
        self.edge_budget = edge_budget
        self.epsilon = epsilon
        self.ell = ell
        self.sampler = sampler
        self.max_attempts = max_attempts
        self.random_state = random_state

    def fit(self, graph: Graph, seeds):
        graph = check_graph(graph)
        seeds = check_seeds(graph, seeds)
        budgets = check_budgets(graph, seeds, self.node_budget, self.edge_budget)
        self.attack_set_, self.report_ = aaimm_attack(
            graph,
            seeds,
            budgets,
            self.epsilon,
            self.ell,
            self.sampler,
            check_random_state(self.random_state),
            self.max_attempts,
        )
        return self

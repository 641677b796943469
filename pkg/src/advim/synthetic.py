"""Synthetic graphs and seed-set generators."""
from __future__ import annotations

import numpy as np

from .graph import Graph

KINDS = ("random-dag", "power-law", "grid")


class InfeasibleSizeError(ValueError):
    pass


def _distinct(codes: np.ndarray) -> np.ndarray:
    """Unique codes in first-draw order."""
    _, first = np.unique(codes, return_index=True)
    return codes[np.sort(first)]


def _fill_pairs(n, m, draw, rng, max_rounds=64):
    """Collect ``m`` distinct edge codes ``u * n + v`` from repeated ``draw(rng, k)``."""
    codes = np.empty(0, dtype=np.int64)
    for _ in range(max_rounds):
        need = m - len(codes)
        if need <= 0:
            break
        u, v = draw(rng, 2 * need + 16)
        ok = u != v
        codes = _distinct(np.concatenate([codes, u[ok] * n + v[ok]]))
    return codes[:m]


def random_dag(n: int, m: int, seed: int) -> Graph:
    """``m`` distinct edges ``i -> j`` with ``i < j``, uniform over such pairs."""
    total = n * (n - 1) // 2
    if n < 1 or m < 0 or m > total:
        raise InfeasibleSizeError(f"random-dag cannot place {m} edges on {n} nodes (max {total})")
    rng = np.random.default_rng(seed)
    if 2 * m > total:
        iu, ju = np.triu_indices(n, 1)
        pick = np.sort(rng.choice(total, m, replace=False))
        return Graph.from_edges(n, np.column_stack([iu[pick], ju[pick]]))

    def draw(r, k):
        a, b = r.integers(0, n, k), r.integers(0, n, k)
        return np.minimum(a, b), np.maximum(a, b)

    codes = _fill_pairs(n, m, draw, rng)
    return Graph.from_edges(n, np.column_stack([codes // n, codes % n]))


def power_law(n: int, m: int, seed: int, exponent: float = 2.5) -> Graph:
    """Chung-Lu style digraph: endpoints drawn with weight ``rank^(-1/(exponent-1))``.

    In- and out-weights use independent node permutations. If the heavy-tailed
    draw cannot supply enough distinct edges the rest come uniformly from the
    unused pairs.
    """
    total = n * (n - 1)
    if n < 1 or m < 0 or m > total:
        raise InfeasibleSizeError(f"power-law cannot place {m} edges on {n} nodes (max {total})")
    rng = np.random.default_rng(seed)
    w = np.arange(1, n + 1, dtype=float) ** (-1.0 / (exponent - 1.0))
    p_out = w[rng.permutation(n)]
    p_in = w[rng.permutation(n)]
    p_out /= p_out.sum()
    p_in /= p_in.sum()

    def draw(r, k):
        return r.choice(n, k, p=p_out), r.choice(n, k, p=p_in)

    codes = _fill_pairs(n, m, draw, rng, max_rounds=16)
    if len(codes) < m:
        # too dense for the heavy-tailed draw: top up from the unused pairs
        taken = np.zeros(n * n, dtype=bool)
        taken[codes] = True
        taken[np.arange(n) * (n + 1)] = True
        rest = rng.permutation(np.flatnonzero(~taken))
        codes = np.concatenate([codes, rest[: m - len(codes)]])
    return Graph.from_edges(n, np.column_stack([codes // n, codes % n]))


def grid(rows: int, cols: int) -> Graph:
    """``rows x cols`` lattice with rightward and downward edges."""
    if rows < 1 or cols < 1:
        raise InfeasibleSizeError("grid dimensions must be positive")
    ids = np.arange(rows * cols).reshape(rows, cols)
    right = np.column_stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()])
    down = np.column_stack([ids[:-1, :].ravel(), ids[1:, :].ravel()])
    return Graph.from_edges(rows * cols, np.concatenate([right, down]))


def generate_synthetic(kind: str, size: tuple[int, int], seed: int = 0) -> Graph:
    """``size`` is ``(n, m)`` for random graphs, ``(rows, cols)`` for grids."""
    a, b = size
    if kind == "random-dag":
        return random_dag(a, b, seed)
    if kind == "power-law":
        return power_law(a, b, seed)
    if kind == "grid":
        return grid(a, b)
    raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")


def top_degree_seeds(g: Graph, k: int) -> np.ndarray:
    """The ``k`` nodes of largest out-degree; ties go to the lower dense id."""
    if not 1 <= k <= g.n:
        raise ValueError(f"k must lie in [1, {g.n}]")
    order = np.lexsort((np.arange(g.n), -g.out_degree))
    return np.sort(order[:k])


def random_seeds(g: Graph, k: int, seed: int) -> np.ndarray:
    if not 1 <= k <= g.n:
        raise ValueError(f"k must lie in [1, {g.n}]")
    return np.sort(np.random.default_rng(seed).choice(g.n, k, replace=False))

"""Input validation helpers shared by the estimators and samplers."""
from __future__ import annotations

import numbers
from typing import Iterable

import numpy as np

from .graph import AttackSet, Budgets, Graph, check_admissible


class NotFittedError(ValueError, AttributeError):
    """Raised when an attack estimator is used before ``fit``."""


def check_random_state(seed) -> np.random.Generator:
    """Turn ``None``, an int or a ``Generator`` into a ``numpy`` Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    if isinstance(seed, np.random.RandomState):
        return np.random.default_rng(seed.randint(2**32))
    raise ValueError(f"{seed!r} cannot be used to seed a numpy Generator")


def check_graph(graph, require_weights: bool = True) -> Graph:
    if not isinstance(graph, Graph):
        raise TypeError(f"expected a Graph, got {type(graph).__name__}")
    if require_weights:
        check_admissible(graph)
    return graph


def check_seeds(graph: Graph, seeds: Iterable[int]) -> np.ndarray:
    """Return the seed set as a sorted unique int array."""
    seeds = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if len(seeds) == 0:
        raise ValueError("seed set must be non-empty")
    if seeds[0] < 0 or seeds[-1] >= graph.n:
        raise ValueError("seed id out of range")
    if graph.removed & set(seeds.tolist()):
        raise ValueError("seed set contains a removed node")
    return seeds


def seed_mask(graph: Graph, seeds: np.ndarray) -> np.ndarray:
    mask = np.zeros(graph.n, dtype=bool)
    mask[seeds] = True
    return mask


def check_budgets(graph: Graph, seeds: np.ndarray, node_budget: int, edge_budget: int) -> Budgets:
    for name, q in (("node_budget", node_budget), ("edge_budget", edge_budget)):
        if not isinstance(q, numbers.Integral) or q < 0:
            raise ValueError(f"{name} must be a non-negative integer, got {q!r}")
    return Budgets(int(node_budget), int(edge_budget)).clamped(graph.n - len(seeds), graph.m)


def check_attack(graph: Graph, seeds: np.ndarray, attack: AttackSet) -> AttackSet:
    attack.validate(graph, seeds.tolist())
    return attack


def check_is_fitted(estimator, attribute: str = "attack_set_") -> None:
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; call 'fit' first."
        )

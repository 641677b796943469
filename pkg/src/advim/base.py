from __future__ import annotations

from sklearn.base import BaseEstimator

from .diffusion import DEFAULT_SIMS, estimate_reduction
from .graph import AttackSet, Graph, remove_elements
from .validation import check_graph, check_is_fitted


class AttackMixin:
    """``fit(graph, seeds)`` learns ``attack_set_``; ``transform`` deletes it.

    Plays the role sklearn's ``TransformerMixin`` plays for arrays: the graph
    is the sample and the seed set is the target.
    """

    def transform(self, graph: Graph) -> Graph:
        check_is_fitted(self)
        return remove_elements(check_graph(graph, require_weights=False), self.attack_set_)

    def fit_transform(self, graph: Graph, seeds) -> Graph:
        return self.fit(graph, seeds).transform(graph)

    def score(self, graph: Graph, seeds, sims: int = DEFAULT_SIMS, random_state=None) -> float:
        """Monte Carlo influence reduction of the fitted attack set."""
        check_is_fitted(self)
        return estimate_reduction(graph, seeds, self.attack_set_, sims, True, random_state).mean


class BaseAttack(AttackMixin, BaseEstimator):
    attack_set_: AttackSet

    def fit(self, graph: Graph, seeds):
        raise NotImplementedError

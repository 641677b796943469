"""Adversarial node and edge removal against influence spread under the linear threshold model."""
from .attack import AAIMMAttack, AttackReport, aaimm_attack, lambda_prime, lambda_star, node_edge_selection
from .diffusion import (
    ExactOracle,
    estimate_reduction,
    estimate_spread,
    exact_reduction,
    exact_spread,
    forward_simulate,
    sample_live_edge_graph,
)
from .forest import ForwardForestAttack, MemoryCapError, aaff_select, build_scored_forests
from .graph import AttackSet, Budgets, Graph, assign_weights, load_edge_list, load_seed_set, remove_elements
from .sampling import (
    DagVRRSampler,
    ForwardBackwardSampler,
    NaiveVRRSampler,
    SamplingError,
    build_dag_model,
    compute_activation_probabilities,
    dag_vrr,
    extract_dag,
    fb_vrr,
    naive_vrr,
    sample_forward_forest,
    sample_rr_path,
)

__version__ = "0.1.0"

__all__ = [
    "AAIMMAttack",
    "AttackReport",
    "AttackSet",
    "Budgets",
    "DagVRRSampler",
    "ExactOracle",
    "ForwardBackwardSampler",
    "ForwardForestAttack",
    "Graph",
    "MemoryCapError",
    "NaiveVRRSampler",
    "SamplingError",
    "aaff_select",
    "aaimm_attack",
    "assign_weights",
    "build_dag_model",
    "build_scored_forests",
    "compute_activation_probabilities",
    "dag_vrr",
    "estimate_reduction",
    "estimate_spread",
    "exact_reduction",
    "exact_spread",
    "extract_dag",
    "fb_vrr",
    "forward_simulate",
    "lambda_prime",
    "lambda_star",
    "load_edge_list",
    "load_seed_set",
    "naive_vrr",
    "node_edge_selection",
    "remove_elements",
    "sample_forward_forest",
    "sample_live_edge_graph",
    "sample_rr_path",
]

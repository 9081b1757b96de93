"""LP relaxations for MAP inference in binary pairwise MRFs with one high-order potential.

The relaxation asks the high-order term to agree with the pairwise marginals
on a chosen edge set S; block coordinate ascent on its dual gives a lower
bound and, when a decoded assignment meets it, a certificate of optimality.
"""
from .dual import DualState, SolveResult, SolverConfig, dual_bound, solve
from .edgesel import initial_tree, select_and_add, tighten_loop, wca_score
from .exact import brute_force_map, junction_min, lp_relaxation_value, treewidth_upper_bound
from .hop import ArgminSet, EdgeSet, hop_min, hop_min_marginals
from .model import (
    INF,
    CardinalityHop,
    EnergyModel,
    InfeasibleError,
    ModelError,
    PatternHop,
    TableHop,
    evaluate_energy,
    exclusion_hop,
    read_model,
    write_model,
)

__all__ = [
    "INF", "ArgminSet", "CardinalityHop", "DualState", "EdgeSet", "EnergyModel", "InfeasibleError",
    "ModelError", "PatternHop", "SolveResult", "SolverConfig", "TableHop", "brute_force_map",
    "dual_bound", "evaluate_energy", "exclusion_hop", "hop_min", "hop_min_marginals", "initial_tree",
    "junction_min", "lp_relaxation_value", "read_model", "select_and_add", "solve", "tighten_loop",
    "treewidth_upper_bound", "wca_score", "write_model",
]

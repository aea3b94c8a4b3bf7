"""Learning Bayesian networks whose CPTs carry local structure.

Networks are scored by minimum description length (or a Dirichlet marginal
likelihood) and searched greedily over DAGs, with each family's CPT
represented as a full table, a default table or a decision tree.
"""

__version__ = "0.1.0"

from .data import Dataset, ancestral_sample, empirical_prob, family_counts, load_csv, save_csv
from .localfit import fit_params, learn_local
from .mdl import family_score, network_score
from .model import (
    BayesianNetwork,
    Dag,
    DecisionTree,
    DefaultTable,
    FullTable,
    Leaf,
    Split,
    VariableTable,
    actual_param_count,
    conditional_dist,
    joint_log_prob,
    partition_of,
    tabular_complexity,
    topological_order,
)
from .netio import load_network, save_network
from .search import hill_climb

__all__ = [
    "BayesianNetwork",
    "Dag",
    "Dataset",
    "DecisionTree",
    "DefaultTable",
    "FullTable",
    "Leaf",
    "Split",
    "VariableTable",
    "actual_param_count",
    "ancestral_sample",
    "conditional_dist",
    "empirical_prob",
    "family_counts",
    "family_score",
    "fit_params",
    "hill_climb",
    "joint_log_prob",
    "learn_local",
    "load_csv",
    "load_network",
    "network_score",
    "partition_of",
    "save_csv",
    "save_network",
    "tabular_complexity",
    "topological_order",
]

"""Eclectic rule extraction from steep-sigmoid feed-forward networks.

The pipeline trains a network whose units behave like binary step units,
induces one decision tree per neuron from forward-propagated training data,
turns every tree into DNF, substitutes hidden-unit symbols until only input
literals remain and finally minimizes the resulting two-level logic.
"""

from heretic.dataset import (
    Dataset,
    DataError,
    Encoder,
    FeatureSpec,
    SplitPlan,
    encode,
    fit_encoder,
    load_dataset,
    stratified_kfold,
    train_prune_split,
)
from heretic.network import Network, NetworkConfig, forward, predict, steep_sigmoid, train
from heretic.rules import DNF, Literal, Ruleset, ruleset_predict, substitute, tree_to_dnf
from heretic.tree import DecisionTree, gain_ratio, induce, prune, tree_predict
from heretic.minimizer import BooleanSpace, equivalent, minimize

__version__ = "0.1.0"

__all__ = [
    "BooleanSpace",
    "DNF",
    "DataError",
    "Dataset",
    "DecisionTree",
    "Encoder",
    "FeatureSpec",
    "Literal",
    "Network",
    "NetworkConfig",
    "Ruleset",
    "SplitPlan",
    "encode",
    "equivalent",
    "fit_encoder",
    "forward",
    "gain_ratio",
    "induce",
    "load_dataset",
    "minimize",
    "predict",
    "prune",
    "ruleset_predict",
    "steep_sigmoid",
    "stratified_kfold",
    "substitute",
    "train",
    "train_prune_split",
    "tree_predict",
    "tree_to_dnf",
]

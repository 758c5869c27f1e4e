"""Comparison methods: C4.5 on the raw labels and a single tree fitted to network labels.

``trepan_lite`` stands in for Trepan. It has no m-of-n tests and draws no
extra queries from the network; it only relabels the available rows.
"""

from __future__ import annotations

from heretic.dataset import Dataset
from heretic.eval import fidelity
from heretic.network import Network, predict
from heretic.tree import DecisionTree, SampleSet, induce, prune


def _kinds(ds: Dataset) -> list[str]:
    return ["binary" if f.kind == "binary" else "real" for f in ds.schema]


def _sample_set(ds: Dataset) -> SampleSet:
    return SampleSet(ds.X, ds.targets, ds.feature_names, _kinds(ds), tuple(ds.classes))


def _check(*parts: Dataset):
    first = parts[0]
    for ds in parts:
        if not ds.encoded:
            raise ValueError("baselines expect encoded datasets")
        if ds.feature_names != first.feature_names or ds.classes != first.classes:
            raise ValueError("datasets do not share one encoded schema")


def fit_tree(train: Dataset, prune_set: Dataset, min_leaf: int = 2, keep_ties: bool = False) -> DecisionTree:
    """Multi-class tree grown on ``train`` and reduced-error pruned on ``prune_set``."""
    t = induce(_sample_set(train), min_leaf)
    if len(prune_set.y):
        t = prune(t, _sample_set(prune_set), keep_ties)
    return t


def c45_direct(train: Dataset, prune_set: Dataset, test: Dataset, min_leaf: int = 2, keep_ties: bool = False):
    """Predictions on ``test`` of a pruned tree learnt from the true labels."""
    _check(train, prune_set, test)
    t = fit_tree(train, prune_set, min_leaf, keep_ties)
    return [t.labels[i] for i in t.route(test.X)], t


def trepan_lite(
    net: Network, train: Dataset, prune_set: Dataset, test: Dataset, min_leaf: int = 2, keep_ties: bool = False
):
    """Predictions on ``test`` of a tree learnt from the network's labels, and its fidelity.

    Returns ``(predictions, fidelity to the network on test)``.
    """
    _check(train, prune_set, test)

    def relabel(ds):
        return ds.relabel([str(c) for c in predict(net, ds.X)]) if len(ds.y) else ds

    t = fit_tree(relabel(train), relabel(prune_set), min_leaf, keep_ties)
    pred = [t.labels[i] for i in t.route(test.X)]
    return pred, fidelity(pred, [str(c) for c in predict(net, test.X)])


__all__ = ["c45_direct", "fit_tree", "trepan_lite"]

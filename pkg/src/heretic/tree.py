"""C4.5-style binary decision trees with reduced-error pruning.

Every internal node tests ``x[feature] <= threshold``. Binary features are
tested with threshold 0.5, so the left branch means "feature = 0" and the
right branch "feature = 1". Real features offer the midpoints between
adjacent distinct values as thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BINARY = "binary"
REAL = "real"


@dataclass
class SampleSet:
    """Rows of inputs with a discrete outcome, ready for tree induction.

    ``y`` holds indices into ``labels``.
    """

    X: np.ndarray
    y: np.ndarray
    input_names: list[str]
    kinds: list[str]
    labels: tuple = (0, 1)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.y), len(self.input_names))
        self.y = np.asarray(self.y, dtype=int)
        if self.X.shape[1] != len(self.input_names) or len(self.kinds) != len(self.input_names):
            raise ValueError("input names, kinds and matrix width disagree")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= len(self.labels)):
            raise ValueError("outcome index outside the label list")

    def __len__(self):
        return len(self.y)

    def subset(self, rows) -> "SampleSet":
        rows = np.asarray(rows, dtype=int)
        return SampleSet(self.X[rows], self.y[rows], self.input_names, self.kinds, self.labels)


@dataclass
class Node:
    counts: np.ndarray
    feature: int | None = None
    threshold: float | None = None
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def support(self) -> int:
        return int(self.counts.sum())

    @property
    def outcome(self) -> int:
        # majority; argmax resolves ties to the lowest label index
        return int(np.argmax(self.counts))

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()


@dataclass
class DecisionTree:
    root: Node
    input_names: list[str]
    kinds: list[str]
    labels: tuple = (0, 1)
    warnings: list[str] = field(default_factory=list)

    @property
    def n_leaves(self) -> int:
        return sum(1 for _ in self.root.leaves())

    @property
    def depth(self) -> int:
        def d(n):
            return 0 if n.is_leaf else 1 + max(d(n.left), d(n.right))

        return d(self.root)

    def paths(self):
        """Yield ``(tests, leaf)`` per leaf; a test is ``(feature, threshold, went_right)``."""

        def walk(node, tests):
            if node.is_leaf:
                yield tuple(tests), node
                return
            yield from walk(node.left, tests + [(node.feature, node.threshold, False)])
            yield from walk(node.right, tests + [(node.feature, node.threshold, True)])

        yield from walk(self.root, [])

    def route(self, X: np.ndarray) -> np.ndarray:
        """Leaf outcome index for every row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.input_names):
            raise ValueError(f"input width {X.shape[1]} does not match tree inputs ({len(self.input_names)})")
        out = np.empty(len(X), dtype=int)

        def fill(node, rows):
            if not len(rows):
                return
            if node.is_leaf:
                out[rows] = node.outcome
                return
            go_left = X[rows, node.feature] <= node.threshold
            fill(node.left, rows[go_left])
            fill(node.right, rows[~go_left])

        fill(self.root, np.arange(len(X)))
        return out

    def structure(self):
        """Nested tuples describing the tree; equal trees give equal structures."""

        def s(n):
            if n.is_leaf:
                return ("leaf", n.outcome, tuple(int(c) for c in n.counts))
            return (n.feature, n.threshold, s(n.left), s(n.right))

        return s(self.root)

    def to_text(self) -> str:
        lines = []

        def literal(f, t, right):
            name = self.input_names[f]
            if self.kinds[f] == BINARY:
                return f"{name} = {1 if right else 0}"
            return f"{name} {'>' if right else '<='} {t:.6g}"

        def walk(node, indent):
            if node.is_leaf:
                lines.append(f"{'|   ' * indent}-> {self.labels[node.outcome]} ({node.support})")
                return
            for child, right in ((node.left, False), (node.right, True)):
                lines.append(f"{'|   ' * indent}{literal(node.feature, node.threshold, right)}")
                walk(child, indent + 1)

        walk(self.root, 0)
        return "\n".join(lines)


def entropy(counts: np.ndarray) -> np.ndarray:
    """Base-2 entropy along the last axis of a count array."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=-1)


def split_gain(y, mask, n_labels: int | None = None) -> tuple[float, float]:
    """Information gain and gain ratio of partitioning ``y`` by boolean ``mask``."""
    y = np.asarray(y, dtype=int)
    mask = np.asarray(mask, dtype=bool)
    n = len(y)
    k = n_labels or (int(y.max()) + 1 if n else 1)
    n_true = int(mask.sum())
    if n == 0 or n_true in (0, n):
        return 0.0, 0.0
    parent = np.bincount(y, minlength=k)
    right = np.bincount(y[mask], minlength=k)
    left = parent - right
    w = np.array([n - n_true, n_true]) / n
    gain = float(entropy(parent) - w[0] * entropy(left) - w[1] * entropy(right))
    gain = max(gain, 0.0)
    split_info = float(entropy(w))
    return gain, gain / split_info


def gain_ratio(y, mask, n_labels: int | None = None) -> float:
    """Gain ratio of the binary test ``mask`` on outcomes ``y``; 0 when ineligible."""
    return split_gain(y, mask, n_labels)[1]


def _best_threshold(values, onehot):
    """Best split on one feature by information gain.

    Returns ``(gain, ratio, threshold)`` or ``None`` if the feature is constant.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    distinct_end = np.nonzero(v[1:] != v[:-1])[0]  # last index of each run
    if not len(distinct_end):
        return None
    cum = np.cumsum(onehot[order], axis=0)
    left = cum[distinct_end]
    total = cum[-1]
    right = total - left
    n = len(v)
    n_left = distinct_end + 1.0
    w_left = n_left / n
    cond = w_left * entropy(left) + (1 - w_left) * entropy(right)
    gains = np.maximum(entropy(total) - cond, 0.0)
    best = int(np.argmax(gains))  # first max -> lowest threshold
    w = np.array([w_left[best], 1 - w_left[best]])
    ratio = gains[best] / float(entropy(w))
    thr = (v[distinct_end[best]] + v[distinct_end[best] + 1]) / 2.0
    return float(gains[best]), float(ratio), float(thr)


def _choose_test(X, y, kinds, n_labels):
    onehot = np.eye(n_labels)[y]
    candidates = []
    for f in range(X.shape[1]):
        col = X[:, f]
        if kinds[f] == BINARY:
            mask = col > 0.5
            if mask.all() or not mask.any():
                continue
            gain, ratio = split_gain(y, mask, n_labels)
            candidates.append((gain, ratio, f, 0.5))
        else:
            best = _best_threshold(col, onehot)
            if best is not None:
                candidates.append((best[0], best[1], f, best[2]))
    if not candidates:
        return None
    positive = [c for c in candidates if c[0] > 1e-12]
    if not positive:
        # nothing informative, but the node is impure: take the first test
        _, _, f, t = candidates[0]
        return f, t
    # C4.5 only ranks tests whose gain reaches the average gain
    avg = sum(c[0] for c in positive) / len(positive)
    eligible = [c for c in positive if c[0] >= avg - 1e-12]
    best = max(eligible, key=lambda c: (round(c[1], 12), -c[2], -c[3]))
    return best[2], best[3]


def induce(s: SampleSet, min_leaf: int = 2) -> DecisionTree:
    """Grow a tree top-down, splitting on the best gain-ratio test.

    Growth stops at pure nodes, when no test separates the rows, or when a
    node holds fewer than ``min_leaf`` rows.
    """
    if len(s) < 1:
        raise ValueError("cannot induce a tree from zero rows")
    k = len(s.labels)
    X, y = s.X, s.y

    def grow(rows):
        counts = np.bincount(y[rows], minlength=k)
        node = Node(counts)
        if np.count_nonzero(counts) <= 1 or len(rows) < min_leaf:
            return node
        test = _choose_test(X[rows], y[rows], s.kinds, k)
        if test is None:
            return node
        f, t = test
        go_left = X[rows, f] <= t
        node.feature, node.threshold = f, t
        node.left = grow(rows[go_left])
        node.right = grow(rows[~go_left])
        return node

    return DecisionTree(grow(np.arange(len(s))), list(s.input_names), list(s.kinds), tuple(s.labels))


def prune(t: DecisionTree, prune_set: SampleSet, keep_ties: bool = False) -> DecisionTree:
    """Reduced-error pruning, bottom-up.

    A subtree becomes a leaf predicting its training majority whenever that
    does not increase the error on ``prune_set``. With ``keep_ties`` the leaf
    must strictly lower the error, so subtrees the pruning rows cannot tell
    apart from a leaf survive. Returns a new tree.
    """
    if len(prune_set) == 0:
        out = DecisionTree(_copy(t.root), t.input_names, t.kinds, t.labels, list(t.warnings))
        out.warnings.append("empty pruning set; tree left unpruned")
        return out
    if list(prune_set.input_names) != list(t.input_names):
        raise ValueError("pruning rows do not match the tree inputs")
    X, y = prune_set.X, prune_set.y

    def walk(node, rows):
        """Return (pruned copy, errors on rows)."""
        leaf_err = int(np.count_nonzero(y[rows] != node.outcome))
        if node.is_leaf:
            return Node(node.counts.copy()), leaf_err
        go_left = X[rows, node.feature] <= node.threshold
        left, e_left = walk(node.left, rows[go_left])
        right, e_right = walk(node.right, rows[~go_left])
        if leaf_err < e_left + e_right or (leaf_err == e_left + e_right and not keep_ties):
            return Node(node.counts.copy()), leaf_err
        return Node(node.counts.copy(), node.feature, node.threshold, left, right), e_left + e_right

    root, _ = walk(t.root, np.arange(len(y)))
    return DecisionTree(root, t.input_names, t.kinds, t.labels, list(t.warnings))


def _copy(node: Node) -> Node:
    if node.is_leaf:
        return Node(node.counts.copy())
    return Node(node.counts.copy(), node.feature, node.threshold, _copy(node.left), _copy(node.right))


def tree_predict(t: DecisionTree, x: Sequence[float]):
    """Outcome label at the leaf reached by a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) != len(t.input_names):
        raise ValueError(f"expected a vector of {len(t.input_names)} inputs")
    node = t.root
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return t.labels[node.outcome]


def errors(t: DecisionTree, s: SampleSet) -> int:
    return int(np.count_nonzero(t.route(s.X) != s.y)) if len(s) else 0

"""Entropy decision trees and bagged random forests.

Trees are stored as flat node arrays (``feature == -1`` marks a leaf) so the
routing kernel can walk them without Python objects. Class labels inside a
tree are 0-based indices; the public API speaks class codes 1..K.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import DomainError
from .numeric import Rng

MIN_GAIN = 1e-12


def _counts(class_counts):
    c = np.asarray(class_counts, dtype=np.float64)
    if c.ndim != 1 or np.any(c < 0):
        raise DomainError("class counts must be a 1-D nonnegative vector")
    return c


def entropy(class_counts):
    """Shannon entropy in bits of a class-count vector."""
    c = _counts(class_counts)
    n = c.sum()
    if n <= 0:
        raise DomainError("entropy of an empty node is undefined")
    p = c[c > 0] / n
    return float(max(0.0, -np.sum(p * np.log2(p))))


def weighted_child_entropy(partitions):
    """Size-weighted mean entropy of the children of a split."""
    parts = [_counts(p) for p in partitions]
    sizes = np.array([p.sum() for p in parts])
    total = sizes.sum()
    if len(parts) == 0 or total <= 0:
        raise DomainError("all partitions are empty")
    return float(sum(s / total * entropy(p) for s, p in zip(sizes, parts) if s > 0))


def information_gain(parent, partitions):
    """Entropy reduction achieved by splitting ``parent`` into ``partitions``."""
    par = _counts(parent)
    parts = [_counts(p) for p in partitions]
    if any(p.shape != par.shape for p in parts) or not np.allclose(sum(parts), par):
        raise DomainError("partitions do not add up to the parent counts")
    return entropy(par) - weighted_child_entropy(parts)


# --------------------------------------------------------------------------
# single tree

@dataclass(frozen=True)
class TreeParams:
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    n_classes: int = 4


@dataclass
class DecisionTree:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    gain: np.ndarray
    n_samples: np.ndarray
    counts: np.ndarray  # (nodes, K)
    value: np.ndarray  # predicted class index per node
    depth_of: np.ndarray
    n_features: int
    params: TreeParams = field(default_factory=TreeParams)

    @property
    def node_count(self):
        return int(self.feature.shape[0])

    @property
    def depth(self):
        return int(self.depth_of.max())

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def stats(self):
        return {"depth": self.depth, "node_count": self.node_count,
                "leaves": self.n_leaves, "internal": self.node_count - self.n_leaves}

    def feature_gains(self):
        """Per-feature gain weighted by the fraction of samples reaching the node."""
        out = np.zeros(self.n_features)
        internal = self.feature >= 0
        np.add.at(out, self.feature[internal],
                  self.gain[internal] * self.n_samples[internal] / self.n_samples[0])
        return out


def _leaf_value(counts):
    return int(np.argmax(counts))  # first max -> lowest class code


def _as_xy(data, labels=None):
    if labels is None:
        X, codes = data.matrix, data.labels
    else:
        X, codes = data, labels
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(codes, dtype=np.int64) - 1
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("cannot fit a tree on an empty dataset")
    if y.shape[0] != X.shape[0]:
        raise DomainError("feature rows and labels differ in length")
    return X, y


def fit_tree(train, params=TreeParams(), rng=None, feature_subset_size=None, labels=None):
    """Greedy entropy tree.

    ``train`` is an :class:`EncodedDataset`, or a matrix when ``labels``
    (class codes 1..K) is given. With ``feature_subset_size`` each node only
    searches that many features drawn from ``rng``.
    """
    X, y = _as_xy(train, labels)
    k = params.n_classes
    if y.min() < 0 or y.max() >= k:
        raise DomainError(f"labels must be class codes 1..{k}")
    n, d = X.shape
    if feature_subset_size is not None:
        if rng is None:
            raise DomainError("feature subsets need an rng")
        feature_subset_size = max(1, min(int(feature_subset_size), d))
    table = _kernels.xlog2x_table(n)
    all_features = np.arange(d, dtype=np.int64)

    feature, threshold, left, right, gain, n_samples, counts, depth_of = ([] for _ in range(8))

    def new_node(idx, depth):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        gain.append(0.0)
        n_samples.append(idx.shape[0])
        counts.append(np.bincount(y[idx], minlength=k))
        depth_of.append(depth)
        return len(feature) - 1

    root = new_node(np.arange(n, dtype=np.int64), 0)
    stack = [(root, np.arange(n, dtype=np.int64))]
    while stack:
        node, idx = stack.pop()
        depth = depth_of[node]
        c = counts[node]
        if (np.count_nonzero(c) <= 1 or idx.shape[0] < params.min_samples_split
                or (params.max_depth is not None and depth >= params.max_depth)):
            continue
        if feature_subset_size is None:
            feats = all_features
        else:
            feats = np.sort(rng.choice(d, feature_subset_size))
        f, thr, g = _kernels.best_split(X, y, idx, feats, k, table)
        if f < 0 or g <= MIN_GAIN:
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node], gain[node] = int(f), float(thr), float(g)
        lnode = new_node(li, depth + 1)
        rnode = new_node(ri, depth + 1)
        left[node], right[node] = lnode, rnode
        # right pushed first so the left subtree is expanded first
        stack.append((rnode, ri))
        stack.append((lnode, li))

    cnt = np.array(counts, dtype=np.int64).reshape(-1, k)
    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        gain=np.array(gain, dtype=np.float64),
        n_samples=np.array(n_samples, dtype=np.int64),
        counts=cnt,
        value=np.argmax(cnt, axis=1).astype(np.int64),
        depth_of=np.array(depth_of, dtype=np.int64),
        n_features=d,
        params=params,
    )


def _rows(tree_or_forest, X):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != tree_or_forest.n_features:
        raise DomainError(f"expected {tree_or_forest.n_features} features, got {X.shape[1]}")
    return np.ascontiguousarray(X), single


def predict_tree_index(tree, X):
    """0-based class index per row."""
    X, _ = _rows(tree, X)
    return _kernels.predict_tree_rows(X, tree.feature, tree.threshold, tree.left, tree.right, tree.value)


def predict_tree(tree, X):
    """Class code(s) 1..K for one row or a matrix of rows."""
    X, single = _rows(tree, X)
    out = predict_tree_index(tree, X) + 1
    return int(out[0]) if single else out


# --------------------------------------------------------------------------
# forest

@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    feature_subset_size: Optional[int] = None  # None -> ceil(sqrt(d))
    tree: TreeParams = field(default_factory=TreeParams)


@dataclass
class Forest:
    trees: list
    bootstrap_indices: list
    oob_curve: list  # (n_trees, oob_error)
    importances: np.ndarray
    n_features: int
    n_classes: int
    oob_scored_by: Optional[list] = None  # per tree: row indices it voted on

    def stats(self):
        depths = [t.depth for t in self.trees]
        nodes = [t.node_count for t in self.trees]
        return {"n_trees": len(self.trees), "mean_depth": float(np.mean(depths)),
                "max_depth": int(max(depths)), "mean_node_count": float(np.mean(nodes)),
                "oob_error": self.oob_curve[-1][1] if self.oob_curve else None}


def fit_forest(train, params=ForestParams(), rng=None, labels=None):
    """Bootstrap-aggregated trees with a running out-of-bag error curve."""
    if params.n_trees < 1:
        raise DomainError("a forest needs at least one tree")
    rng = rng if rng is not None else Rng(0)
    X, y = _as_xy(train, labels)
    n, d = X.shape
    k = params.tree.n_classes
    m_try = params.feature_subset_size or int(math.ceil(math.sqrt(d)))

    votes = np.zeros((n, k), dtype=np.int64)
    trees, bags, curve, scored_by = [], [], [], []
    gains = np.zeros(d)
    for t in range(params.n_trees):
        tree_rng = rng.fork(f"tree/{t}")
        bag = tree_rng.sample_with_replacement(n, n)
        tree = fit_tree(X[bag], params.tree, rng=tree_rng, feature_subset_size=m_try, labels=y[bag] + 1)
        oob = np.nonzero(np.bincount(bag, minlength=n) == 0)[0]
        if oob.size:
            pred = predict_tree_index(tree, X[oob])
            votes[oob, pred] += 1
        voted = votes.sum(axis=1) > 0
        if voted.any():
            err = float(np.mean(np.argmax(votes[voted], axis=1) != y[voted]))
        else:
            err = float("nan")
        curve.append((t + 1, err))
        gains += tree.feature_gains()
        trees.append(tree)
        bags.append(bag)
        scored_by.append(oob)
    total = gains.sum()
    importances = gains / total if total > 0 else gains
    return Forest(trees, bags, curve, importances, d, k, scored_by)


def forest_votes(forest, X):
    X, _ = _rows(forest, X)
    votes = np.zeros((X.shape[0], forest.n_classes), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for tree in forest.trees:
        votes[rows, predict_tree_index(tree, X)] += 1
    return votes


def predict_forest(forest, X):
    """Plurality vote; ties go to the lowest class code."""
    X, single = _rows(forest, X)
    out = np.argmax(forest_votes(forest, X), axis=1) + 1
    return int(out[0]) if single else out

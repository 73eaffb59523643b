"""Binary decision-tree growing with variance or Gini split selection.

The splitter scans every candidate feature in ascending index order and
every midpoint between consecutive distinct sorted values, keeping the
first strictly best gain. Ties therefore resolve to the lowest feature
index and lowest threshold, which makes tree structure reproducible
across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ir import Leaf, SplitNode, TreeNode

VARIANCE = "variance"
GINI = "gini"


@dataclass
class Split:
    feature: int
    threshold: float
    gain: float  # impurity decrease in per-sample units
    left_mask: np.ndarray


def node_impurity(y: np.ndarray, criterion: str, n_classes: int = 0) -> float:
    if criterion == VARIANCE:
        return float(np.var(y))
    counts = np.bincount(y.astype(np.int64), minlength=n_classes)
    p = counts / len(y)
    return float(1.0 - np.sum(p * p))


def best_split(X: np.ndarray, y: np.ndarray, features, criterion: str,
               n_classes: int = 0, min_child: int = 1) -> Split | None:
    """Exhaustive scan for the best binary split over the given features.

    Returns None when no split produces a strict impurity decrease (pure
    node, constant candidate features, or children below min_child).
    """
    n = len(y)
    parent = node_impurity(y, criterion, n_classes)
    if parent <= 0.0 or n < 2 * min_child:
        return None
    best: Split | None = None
    best_gain = 0.0
    for feat in features:
        col = X[:, feat]
        order = np.argsort(col, kind="stable")
        sorted_col = col[order]
        sorted_y = y[order]
        if criterion == VARIANCE:
            gains, sizes = _variance_gains(sorted_y, parent)
        else:
            gains, sizes = _gini_gains(sorted_y, parent, n_classes)
        # splits are only allowed between distinct consecutive values
        distinct = sorted_col[:-1] < sorted_col[1:]
        valid = distinct & (sizes >= min_child) & (sizes <= n - min_child)
        if not valid.any():
            continue
        gains = np.where(valid, gains, -np.inf)
        pos = int(np.argmax(gains))
        gain = float(gains[pos])
        if gain > best_gain:
            lo, hi = sorted_col[pos], sorted_col[pos + 1]
            threshold = (lo + hi) / 2.0
            if threshold >= hi:  # adjacent floats: keep the split non-trivial
                threshold = lo
            best_gain = gain
            best = Split(int(feat), float(threshold), gain, col <= threshold)
    return best


def _variance_gains(sorted_y: np.ndarray, parent: float):
    """Impurity decrease for every prefix split position, vectorized.

    Uses prefix sums of y and y^2; gain at position i means the left child
    holds sorted rows 0..i.
    """
    n = len(sorted_y)
    csum = np.cumsum(sorted_y)
    csum2 = np.cumsum(sorted_y * sorted_y)
    total, total2 = csum[-1], csum2[-1]
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    left_sse = csum2[:-1] - csum[:-1] ** 2 / nl
    right_sse = (total2 - csum2[:-1]) - (total - csum[:-1]) ** 2 / nr
    gains = parent - (left_sse + right_sse) / n
    return gains, nl


def _gini_gains(sorted_y: np.ndarray, parent: float, n_classes: int):
    n = len(sorted_y)
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), sorted_y.astype(np.int64)] = 1.0
    prefix = np.cumsum(onehot, axis=0)
    total = prefix[-1]
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    left_counts = prefix[:-1]
    right_counts = total - left_counts
    gini_l = 1.0 - np.sum(left_counts * left_counts, axis=1) / (nl * nl)
    gini_r = 1.0 - np.sum(right_counts * right_counts, axis=1) / (nr * nr)
    gains = parent - (nl * gini_l + nr * gini_r) / n
    return gains, nl


def leaf_value(y: np.ndarray, criterion: str, n_classes: int = 0) -> float:
    """Mean for regression; majority class (lowest index on ties) otherwise."""
    if criterion == VARIANCE:
        return float(np.mean(y))
    counts = np.bincount(y.astype(np.int64), minlength=n_classes)
    return float(np.argmax(counts))


def grow_tree(X: np.ndarray, y: np.ndarray, max_depth: int, criterion: str,
              n_classes: int = 0, rng: np.random.Generator | None = None,
              n_candidate_features: int | None = None, min_child: int = 1,
              total_samples: int | None = None) -> TreeNode:
    """Grow one tree recursively.

    When n_candidate_features is given, each split considers a fresh
    random feature subset (ascending index order within the subset) drawn
    from rng; otherwise every feature is a candidate.
    """
    d = X.shape[1]
    if total_samples is None:
        total_samples = len(y)

    def build(rows: np.ndarray, depth: int) -> TreeNode:
        ys = y[rows]
        if depth >= max_depth or len(rows) < 2 * min_child:
            return Leaf(leaf_value(ys, criterion, n_classes))
        if n_candidate_features is not None and n_candidate_features < d:
            feats = np.sort(rng.choice(d, size=n_candidate_features, replace=False))
        else:
            feats = np.arange(d)
        split = best_split(X[rows], ys, feats, criterion, n_classes, min_child)
        if split is None:
            return Leaf(leaf_value(ys, criterion, n_classes))
        left_rows = rows[split.left_mask]
        right_rows = rows[~split.left_mask]
        return SplitNode(
            split.feature, split.threshold,
            build(left_rows, depth + 1), build(right_rows, depth + 1),
            n_samples=len(rows), impurity_decrease=split.gain,
        )

    return build(np.arange(len(y)), 0)

"""Model-tree training: variance-reduction splits, linear models in leaves."""

from __future__ import annotations

import numpy as np

from ..dataset import CLASSIFICATION, Dataset
from .cart import VARIANCE, grow_tree
from .config import M5Config
from .ir import ForestModel, Leaf, MEAN, SplitNode, TreeNode
from .rf import TrainError

RIDGE_DAMPING = 1e-8
# A numerically singular leaf system: beyond this condition number the
# plain solve returns huge cancelling coefficients that do not survive
# narrowing to deployment precision.
COND_LIMIT = 1e12
# Collapse a subtree when its single-leaf model is at least this close to
# the subtree's training RMSE; the slack absorbs float noise on data the
# leaf model fits exactly.
PRUNE_SLACK = 1e-12


def _fit_leaf_model(X: np.ndarray, y: np.ndarray, warnings: list[str]) -> Leaf:
    """Ordinary least squares over all features, with two fallbacks.

    Leaves holding fewer rows than d+1 cannot support a full linear model
    and fall back to a constant mean (flagged). Singular or numerically
    singular normal equations (exactly collinear columns, for instance)
    fall back to ridge with damping 1e-8 relative to the gram diagonal
    (flagged).
    """
    n, d = X.shape
    if n < d + 1:
        warnings.append(f"leaf with {n} rows < {d + 1}: constant fallback")
        return Leaf(float(np.mean(y)), np.zeros(d, dtype=np.float64))
    A = np.column_stack([X, np.ones(n)])
    gram = A.T @ A
    rhs = A.T @ y
    coef = None
    cond = np.linalg.cond(gram)
    if np.isfinite(cond) and cond <= COND_LIMIT:
        try:
            coef = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            coef = None
    if coef is None or not np.all(np.isfinite(coef)):
        warnings.append("singular leaf system: ridge fallback")
        damping = RIDGE_DAMPING * (float(np.mean(np.diag(gram))) or 1.0)
        coef = np.linalg.solve(gram + damping * np.eye(d + 1), rhs)
    return Leaf(float(coef[-1]), coef[:-1].copy())


def _leaf_predictions(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X), dtype=np.float64)

    def walk(n: TreeNode, idx: np.ndarray):
        if isinstance(n, Leaf):
            out[idx] = X[idx] @ n.coefficients + n.value
            return
        mask = X[idx, n.feature] <= n.threshold
        walk(n.left, idx[mask])
        walk(n.right, idx[~mask])

    walk(node, np.arange(len(X)))
    return out


def _attach_models(node: TreeNode, X: np.ndarray, y: np.ndarray,
                   idx: np.ndarray, warnings: list[str]) -> TreeNode:
    if isinstance(node, Leaf):
        return _fit_leaf_model(X[idx], y[idx], warnings)
    mask = X[idx, node.feature] <= node.threshold
    return SplitNode(
        node.feature, node.threshold,
        _attach_models(node.left, X, y, idx[mask], warnings),
        _attach_models(node.right, X, y, idx[~mask], warnings),
        node.n_samples, node.impurity_decrease,
    )


def _prune(node: TreeNode, X: np.ndarray, y: np.ndarray, idx: np.ndarray,
           warnings: list[str]) -> TreeNode:
    """Bottom-up: replace a subtree by one leaf model when that model's
    training RMSE is no worse than the subtree's."""
    if isinstance(node, Leaf):
        return node
    mask = X[idx, node.feature] <= node.threshold
    left = _prune(node.left, X, y, idx[mask], warnings)
    right = _prune(node.right, X, y, idx[~mask], warnings)
    node = SplitNode(node.feature, node.threshold, left, right,
                     node.n_samples, node.impurity_decrease)
    subtree_rmse = float(np.sqrt(np.mean((_leaf_predictions(node, X[idx]) - y[idx]) ** 2)))
    candidate = _fit_leaf_model(X[idx], y[idx], [])
    leaf_rmse = float(np.sqrt(np.mean((X[idx] @ candidate.coefficients
                                       + candidate.value - y[idx]) ** 2)))
    if leaf_rmse <= subtree_rmse + PRUNE_SLACK:
        return candidate
    return node


def train_m5(ds: Dataset, rows: np.ndarray, cfg: M5Config) -> ForestModel:
    """Fit a model tree. Regression only; classification input is an error."""
    cfg.validate()
    if ds.task == CLASSIFICATION:
        raise TrainError("M5 is regression-only")
    rows = np.asarray(rows)
    if len(rows) == 0:
        raise TrainError("empty training set")
    X = ds.rows[rows]
    y = ds.target[rows]
    # depth is bounded by the leaf-size stop, not a config knob
    max_depth = max(1, int(np.ceil(np.log2(max(2, len(rows) / cfg.min_leaf_size))) + 1))
    skeleton = grow_tree(X, y, max_depth, VARIANCE, min_child=cfg.min_leaf_size)
    warnings: list[str] = []
    tree = _attach_models(skeleton, X, y, np.arange(len(y)), warnings)
    if cfg.prune:
        tree = _prune(tree, X, y, np.arange(len(y)), warnings)
    return ForestModel(
        task=ds.task, n_features=ds.n_features, trees=(tree,),
        aggregation=MEAN, leaf_kind="linear", warnings=tuple(warnings),
        family="m5",
    )

"""Training backends and the reference (64-bit) prediction path."""

from __future__ import annotations

import numpy as np

from ..dataset import CLASSIFICATION, Dataset
from .ann import forward, train_ann
from .config import (AnnConfig, ConfigError, FAMILIES, M5Config, ModelConfig,
                     RfConfig, SvmConfig, config_label, default_config,
                     make_config)
from .ir import (AnnModel, ForestModel, Hyperplane, IrError, Leaf, MAJORITY_VOTE,
                 MEAN, SplitNode, SvmModel, TrainedModelIR, TreeNode,
                 count_nodes, model_from_json, model_to_json, tree_depth)
from .m5 import train_m5
from .rf import TrainError, train_rf
from .svm import train_svm

__all__ = [
    "AnnConfig", "RfConfig", "M5Config", "SvmConfig", "ModelConfig",
    "ConfigError", "FAMILIES", "default_config", "make_config", "config_label",
    "AnnModel", "ForestModel", "SvmModel", "TrainedModelIR", "Hyperplane",
    "Leaf", "SplitNode", "TreeNode", "IrError", "TrainError",
    "MEAN", "MAJORITY_VOTE", "count_nodes", "tree_depth",
    "model_to_json", "model_from_json",
    "train_ann", "train_rf", "train_m5", "train_svm", "train_model",
    "predict", "predict_batch",
]

_TRAINERS = {
    AnnConfig: train_ann,
    RfConfig: train_rf,
    M5Config: train_m5,
    SvmConfig: train_svm,
}


def train_model(ds: Dataset, rows, cfg: ModelConfig) -> TrainedModelIR:
    """Dispatch to the family trainer for cfg."""
    trainer = _TRAINERS.get(type(cfg))
    if trainer is None:
        raise ConfigError(f"no trainer for {type(cfg).__name__}")
    return trainer(ds, np.asarray(rows), cfg)


def _eval_tree_batch(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X), dtype=np.float64)

    def walk(n: TreeNode, idx: np.ndarray):
        if isinstance(n, Leaf):
            if n.coefficients is not None:
                out[idx] = X[idx] @ n.coefficients + n.value
            else:
                out[idx] = n.value
            return
        mask = X[idx, n.feature] <= n.threshold
        walk(n.left, idx[mask])
        walk(n.right, idx[~mask])

    walk(node, np.arange(len(X)))
    return out


def predict_batch(model: TrainedModelIR, X: np.ndarray) -> np.ndarray:
    """Reference evaluation of many rows in 64-bit arithmetic.

    Returns float predictions for regression, int64 class indices for
    classification. This is the ground truth the generated C code is
    validated against.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise IrError(f"expected (n, {model.n_features}) feature matrix, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise IrError("non-finite feature values")
    if isinstance(model, AnnModel):
        Z = model.normalization.apply(X)
        scores = forward(Z, model.weights, model.biases, model.activations)[-1]
        if model.task == CLASSIFICATION:
            return np.argmax(scores, axis=1).astype(np.int64)
        return scores[:, 0] * model.output_std + model.output_mean
    if isinstance(model, ForestModel):
        per_tree = np.stack([_eval_tree_batch(t, X) for t in model.trees])
        if model.aggregation == MEAN:
            return per_tree.mean(axis=0)
        votes = np.zeros((len(X), model.n_classes), dtype=np.int64)
        for tree_out in per_tree.astype(np.int64):
            votes[np.arange(len(X)), tree_out] += 1
        return np.argmax(votes, axis=1).astype(np.int64)
    if isinstance(model, SvmModel):
        if model.task != CLASSIFICATION:
            hp = model.hyperplanes[0]
            return X @ hp.weights + hp.bias
        votes = np.zeros((len(X), model.n_classes), dtype=np.int64)
        for hp in model.hyperplanes:
            decision = X @ hp.weights + hp.bias
            votes[np.arange(len(X)), np.where(decision >= 0, hp.class_a, hp.class_b)] += 1
        return np.argmax(votes, axis=1).astype(np.int64)
    raise IrError(f"cannot evaluate {type(model).__name__}")


def predict(model: TrainedModelIR, x) -> float | int:
    """Reference evaluation of a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise IrError("predict expects a single feature vector")
    result = predict_batch(model, x.reshape(1, -1))[0]
    if model.task == CLASSIFICATION:
        return int(result)
    return float(result)

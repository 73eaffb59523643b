"""Width-narrowed model parameters and a matching reference evaluator.

The code generator narrows every stored scalar from the 64-bit training
representation to the deployment width (32-bit by default). This module
produces that narrowed parameter set and evaluates it with the exact
operation order of the generated C code: accumulations start from the
bias and add one product per input index, ascending. Comparisons and
linear algebra then agree bit for bit with the compiled artifact
(compiled without FMA contraction); only the exponential inside the
sigmoid may differ from libm by an ulp or two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import CLASSIFICATION
from ..models import (AnnModel, ForestModel, Leaf, SplitNode, SvmModel,
                      TrainedModelIR, TreeNode)
from ..models.ir import SIGMOID


class NarrowingError(ValueError):
    pass


def scalar_dtype(scalar_width: int):
    if scalar_width == 4:
        return np.float32
    if scalar_width == 8:
        return np.float64
    raise NarrowingError(f"unsupported scalar width {scalar_width}")


@dataclass(frozen=True)
class NarrowedAnn:
    inline_normalization: bool
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[str, ...]
    input_mean: np.ndarray | None
    input_std: np.ndarray | None
    output_mean: float | None
    output_std: float | None


def narrow_ann(model: AnnModel, scalar_width: int, inline_normalization: bool) -> NarrowedAnn:
    """Narrow a network, optionally folding normalization into the weights.

    With inline_normalization the input statistics (and for regression the
    output de-normalization pair) stay as separate constants. Without it
    they are folded into the first and last layer in 64-bit arithmetic
    before narrowing, so the emitted constant count is exactly the
    shape-based parameter count.
    """
    dt = scalar_dtype(scalar_width)
    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    regression = model.task != CLASSIFICATION
    if inline_normalization:
        mean = model.normalization.mean.astype(dt)
        std = model.normalization.std.astype(dt)
        out_mean = float(dt(model.output_mean)) if regression else None
        out_std = float(dt(model.output_std)) if regression else None
    else:
        scale = 1.0 / model.normalization.std
        biases[0] = biases[0] - weights[0] @ (model.normalization.mean * scale)
        weights[0] = weights[0] * scale[None, :]
        if regression:
            weights[-1] = weights[-1] * model.output_std
            biases[-1] = biases[-1] * model.output_std + model.output_mean
        mean = std = None
        out_mean = out_std = None
    return NarrowedAnn(
        inline_normalization=inline_normalization,
        weights=tuple(w.astype(dt) for w in weights),
        biases=tuple(b.astype(dt) for b in biases),
        activations=model.activations,
        input_mean=mean, input_std=std,
        output_mean=out_mean, output_std=out_std,
    )


def narrow_tree(node: TreeNode, dt) -> TreeNode:
    if isinstance(node, Leaf):
        coeffs = None if node.coefficients is None else node.coefficients.astype(dt)
        return Leaf(float(dt(node.value)), coeffs)
    return SplitNode(node.feature, float(dt(node.threshold)),
                     narrow_tree(node.left, dt), narrow_tree(node.right, dt),
                     node.n_samples, node.impurity_decrease)


@dataclass(frozen=True)
class NarrowedSvm:
    weights: np.ndarray  # (n_pairs, d)
    biases: np.ndarray   # (n_pairs,)
    pairs: tuple[tuple[int, int], ...]


def narrow_svm(model: SvmModel, scalar_width: int) -> NarrowedSvm:
    dt = scalar_dtype(scalar_width)
    return NarrowedSvm(
        weights=np.stack([hp.weights for hp in model.hyperplanes]).astype(dt),
        biases=np.array([hp.bias for hp in model.hyperplanes], dtype=dt),
        pairs=tuple((hp.class_a, hp.class_b) for hp in model.hyperplanes),
    )


def _sequential_matvec(src: np.ndarray, weights: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """acc = bias; acc += W[r][c] * src[c] for c ascending, per output r.

    Vectorized over rows and output units; the reduction order over c is
    the loop order of the generated code, one rounding per operation.
    """
    n = len(src)
    acc = np.broadcast_to(biases, (n, len(biases))).copy()
    for c in range(src.shape[1]):
        acc = acc + weights[:, c][None, :] * src[:, c][:, None]
    return acc


def _sequential_dot(src: np.ndarray, weights: np.ndarray, bias) -> np.ndarray:
    acc = np.full(len(src), bias, dtype=src.dtype)
    for k in range(src.shape[1]):
        acc = acc + weights[k] * src[:, k]
    return acc


def _eval_tree(node: TreeNode, X: np.ndarray, out: np.ndarray, idx: np.ndarray):
    if isinstance(node, Leaf):
        if node.coefficients is not None:
            out[idx] = _sequential_dot(X[idx], node.coefficients, node.value)
        else:
            out[idx] = node.value
        return
    mask = X[idx, node.feature] <= node.threshold
    _eval_tree(node.left, X, out, idx[mask])
    _eval_tree(node.right, X, out, idx[~mask])


def predict_narrowed(model: TrainedModelIR, X: np.ndarray, scalar_width: int = 4,
                     inline_normalization: bool = True) -> np.ndarray:
    """Evaluate the narrowed model on many rows, mirroring the C code.

    Returns dtype-width floats for regression and int64 class indices for
    classification. For tree and linear models the result is bit-identical
    to the compiled artifact; network outputs may differ in the last ulps
    through the exponential.
    """
    dt = scalar_dtype(scalar_width)
    X = np.asarray(X, dtype=np.float64).astype(dt)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise NarrowingError(f"expected (n, {model.n_features}) matrix, got {X.shape}")
    if isinstance(model, AnnModel):
        p = narrow_ann(model, scalar_width, inline_normalization)
        src = (X - p.input_mean) / p.input_std if p.inline_normalization else X
        for W, b, act in zip(p.weights, p.biases, p.activations):
            src = _sequential_matvec(src, W, b)
            if act == SIGMOID:
                with np.errstate(over="ignore"):
                    src = dt(1.0) / (dt(1.0) + np.exp(-src))
        if model.task == CLASSIFICATION:
            return np.argmax(src, axis=1).astype(np.int64)
        out = src[:, 0]
        if p.inline_normalization:
            out = out * dt(p.output_std) + dt(p.output_mean)
        return out
    if isinstance(model, ForestModel):
        trees = [narrow_tree(t, dt) for t in model.trees]
        if model.task == CLASSIFICATION:
            votes = np.zeros((len(X), model.n_classes), dtype=np.int64)
            out = np.empty(len(X), dtype=dt)
            for tree in trees:
                _eval_tree(tree, X, out, np.arange(len(X)))
                votes[np.arange(len(X)), out.astype(np.int64)] += 1
            return np.argmax(votes, axis=1).astype(np.int64)
        acc = np.zeros(len(X), dtype=dt)
        out = np.empty(len(X), dtype=dt)
        for tree in trees:
            _eval_tree(tree, X, out, np.arange(len(X)))
            acc = acc + out
        return acc / dt(len(trees))
    if isinstance(model, SvmModel):
        p = narrow_svm(model, scalar_width)
        if model.task != CLASSIFICATION:
            return _sequential_dot(X, p.weights[0], p.biases[0])
        votes = np.zeros((len(X), model.n_classes), dtype=np.int64)
        for pair_idx, (a, b) in enumerate(p.pairs):
            decision = _sequential_dot(X, p.weights[pair_idx], p.biases[pair_idx])
            votes[np.arange(len(X)), np.where(decision >= 0, a, b)] += 1
        return np.argmax(votes, axis=1).astype(np.int64)
    raise NarrowingError(f"cannot evaluate {type(model).__name__}")

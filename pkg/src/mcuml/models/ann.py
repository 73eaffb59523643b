"""Feed-forward network training with mini-batch gradient descent.

The deployed network is a stack of fully connected layers: sigmoid (or
identity) hidden activations and a linear output layer. Regression trains
on z-scored features and target under squared error; classification keeps
the linear output scores and trains with softmax cross-entropy, so the
deployed decision is an argmax over raw scores.
"""

from __future__ import annotations

import numpy as np

from ..dataset import CLASSIFICATION, Dataset, fit_normalization
from .config import AnnConfig
from .ir import AnnModel, IDENTITY, SIGMOID
from .rf import TrainError


def sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def init_parameters(layer_sizes, rng):
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(X, weights, biases, activations):
    """Returns the list of layer outputs, starting with the input batch."""
    outputs = [X]
    for W, b, act in zip(weights, biases, activations):
        z = outputs[-1] @ W.T + b
        outputs.append(sigmoid(z) if act == SIGMOID else z)
    return outputs

def _softmax(scores):
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_gradients(X, Y, weights, biases, activations, classification):
    """Mean loss over the batch plus gradients for every layer.

    Squared error (halved, per sample) for regression; softmax
    cross-entropy for classification. Y is (n, outputs): targets for
    regression, one-hot rows for classification.
    """
    outputs = forward(X, weights, biases, activations)
    pred = outputs[-1]
    n = len(X)
    if classification:
        probs = _softmax(pred)
        loss = float(-np.mean(np.sum(Y * np.log(probs + 1e-300), axis=1)))
        delta = (probs - Y) / n
    else:
        diff = pred - Y
        with np.errstate(over="ignore"):  # divergence is caught by the caller
            loss = float(0.5 * np.mean(np.sum(diff * diff, axis=1)))
        delta = diff / n
    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = delta.T @ outputs[layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = delta @ weights[layer]
            if activations[layer - 1] == SIGMOID:
                out = outputs[layer]
                delta = delta * out * (1.0 - out)
    return loss, grads_w, grads_b


def train_ann(ds: Dataset, rows: np.ndarray, cfg: AnnConfig) -> AnnModel:
    cfg.validate()
    rows = np.asarray(rows)
    if len(rows) < 2:
        raise TrainError("need at least 2 training rows")
    classification = ds.task == CLASSIFICATION
    norm = fit_normalization(ds, rows)
    X = norm.apply(ds.rows[rows])
    if classification:
        n_out = ds.n_classes
        Y = np.zeros((len(rows), n_out))
        Y[np.arange(len(rows)), ds.target[rows].astype(np.int64)] = 1.0
        out_mean, out_std = 0.0, 1.0
    else:
        n_out = 1
        raw = ds.target[rows]
        out_mean = float(raw.mean())
        out_std = float(raw.std()) or 1.0
        Y = ((raw - out_mean) / out_std).reshape(-1, 1)
    layer_sizes = (ds.n_features,) + (cfg.neurons,) * cfg.hidden_layers + (n_out,)
    activations = (cfg.hidden_activation,) * cfg.hidden_layers + (IDENTITY,)
    rng = np.random.default_rng(cfg.seed)
    weights, biases = init_parameters(layer_sizes, rng)
    n = len(rows)
    batch = min(cfg.batch_size, n)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            loss, gw, gb = loss_and_gradients(X[idx], Y[idx], weights, biases,
                                              activations, classification)
            if not np.isfinite(loss):
                raise TrainError(f"non-finite loss at epoch {epoch}")
            for layer in range(len(weights)):
                weights[layer] -= cfg.learning_rate * gw[layer]
                biases[layer] -= cfg.learning_rate * gb[layer]
    return AnnModel(
        task=ds.task,
        layer_sizes=layer_sizes,
        weights=tuple(w.copy() for w in weights),
        biases=tuple(b.copy() for b in biases),
        activations=activations,
        normalization=norm,
        output_mean=out_mean,
        output_std=out_std,
        n_classes=ds.n_classes if classification else None,
    )

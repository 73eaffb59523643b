"""Random forest training on bootstrap samples with random split features."""

from __future__ import annotations

import math

import numpy as np

from ..dataset import CLASSIFICATION, Dataset
from .cart import GINI, VARIANCE, grow_tree
from .config import RfConfig
from .ir import MAJORITY_VOTE, MEAN, ForestModel


class TrainError(RuntimeError):
    pass


def train_rf(ds: Dataset, rows: np.ndarray, cfg: RfConfig) -> ForestModel:
    """Fit cfg.trees CART trees, each on its own bootstrap sample.

    Per-split feature subsets default to ceil(sqrt(d)) candidates for
    classification and ceil(d/3) for regression. Deterministic given
    (rows, cfg): tree t draws from a generator seeded with (seed, t).
    """
    cfg.validate()
    rows = np.asarray(rows)
    if len(rows) == 0:
        raise TrainError("empty training set")
    X = ds.rows[rows]
    y = ds.target[rows]
    d = ds.n_features
    classification = ds.task == CLASSIFICATION
    criterion = GINI if classification else VARIANCE
    n_classes = ds.n_classes if classification else 0
    if cfg.feature_subsample is not None:
        m = min(cfg.feature_subsample, d)
    elif classification:
        m = min(math.ceil(math.sqrt(d)), d)
    else:
        m = min(math.ceil(d / 3), d)
    sample_size = max(1, int(round(cfg.bootstrap_fraction * len(rows))))
    trees = []
    for t in range(cfg.trees):
        rng = np.random.default_rng([cfg.seed, t])
        boot = rng.integers(0, len(rows), size=sample_size)
        trees.append(
            grow_tree(X[boot], y[boot], cfg.max_depth, criterion, n_classes,
                      rng=rng, n_candidate_features=m)
        )
    return ForestModel(
        task=ds.task, n_features=d, trees=tuple(trees),
        aggregation=MAJORITY_VOTE if classification else MEAN,
        n_classes=ds.n_classes if classification else None,
        family="rf",
    )

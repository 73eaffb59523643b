"""Prediction quality metrics and cross-validated evaluation.

Regression is scored with the coefficient of determination plus MAE and
RMSE; classification with accuracy and macro-averaged precision, recall
and F1. Macro (not micro) averaging is used for multi-class tasks: every
class that occurs in either the truth or the predictions contributes one
equally weighted term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import CLASSIFICATION, REGRESSION, Dataset, FoldPlan

REGRESSION_METRICS = ("r2", "mae", "rmse")
CLASSIFICATION_METRICS = ("accuracy", "precision", "recall", "f1")


class MetricError(ValueError):
    pass


def _check_pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise MetricError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if len(pred) == 0:
        raise MetricError("empty prediction vector")
    return pred, truth


def r_squared(pred, truth) -> float:
    """1 - SSE/SST with the mean taken over the evaluated truth values.

    May be negative for predictors worse than the truth mean. Undefined
    (raises) when the truth has zero variance.
    """
    pred, truth = _check_pair(pred, truth)
    mean = truth.mean()
    sst = float(np.sum((mean - truth) ** 2))
    if sst == 0.0:
        raise MetricError("truth has zero variance, r_squared is undefined")
    sse = float(np.sum((pred - truth) ** 2))
    return 1.0 - sse / sst


def mae(pred, truth) -> float:
    pred, truth = _check_pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def rmse(pred, truth) -> float:
    pred, truth = _check_pair(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def accuracy(pred, truth) -> float:
    """Fraction of predictions that exactly match the true class."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1 or len(pred) == 0:
        raise MetricError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean(pred == truth))


def precision_recall_f1(pred, truth, n_classes: int) -> tuple[float, float, float]:
    """Macro-averaged precision, recall and F1 over the classes present.

    Classes absent from both pred and truth are excluded from the macro
    average; zero-denominator per-class values count as 0.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1 or len(pred) == 0:
        raise MetricError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.max(initial=0) >= n_classes or truth.max(initial=0) >= n_classes:
        raise MetricError("class index out of range")
    precisions, recalls, f1s = [], [], []
    for cls in range(n_classes):
        in_pred = pred == cls
        in_truth = truth == cls
        if not in_pred.any() and not in_truth.any():
            continue
        tp = float(np.sum(in_pred & in_truth))
        p = tp / in_pred.sum() if in_pred.any() else 0.0
        r = tp / in_truth.sum() if in_truth.any() else 0.0
        f = 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    return (float(np.mean(precisions)), float(np.mean(recalls)), float(np.mean(f1s)))


def compute_metrics(pred, truth, task: str, n_classes: int | None = None) -> dict[str, float]:
    """All metrics for one prediction vector, keyed by metric name."""
    if task == REGRESSION:
        return {"r2": r_squared(pred, truth), "mae": mae(pred, truth),
                "rmse": rmse(pred, truth)}
    prec, rec, f1 = precision_recall_f1(pred, truth, n_classes)
    return {"accuracy": accuracy(pred, truth), "precision": prec,
            "recall": rec, "f1": f1}


@dataclass(frozen=True)
class MetricReport:
    """Per-fold metric values with mean and sample standard deviation."""

    task: str
    k: int
    per_fold: dict[str, tuple[float, ...]]

    @property
    def metric_names(self) -> tuple[str, ...]:
        return REGRESSION_METRICS if self.task == REGRESSION else CLASSIFICATION_METRICS

    def mean(self, name: str) -> float:
        return float(np.mean(self.per_fold[name]))

    def std(self, name: str) -> float:
        # sample std across folds: the folds are a sample of possible splits
        return float(np.std(self.per_fold[name], ddof=1))

    def summary(self) -> dict[str, tuple[float, float]]:
        return {name: (self.mean(name), self.std(name)) for name in self.metric_names}

    def render_row(self, width: int = 17) -> str:
        cells = [f"{self.mean(n):.2f}+/-{self.std(n):.2f}" for n in self.metric_names]
        return "".join(c.ljust(width) for c in cells[:-1]) + cells[-1]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "k": self.k,
            "per_fold": {k: list(v) for k, v in self.per_fold.items()},
            "mean": {n: self.mean(n) for n in self.metric_names},
            "std": {n: self.std(n) for n in self.metric_names},
        }


def render_header(task: str, width: int = 17) -> str:
    names = REGRESSION_METRICS if task == REGRESSION else CLASSIFICATION_METRICS
    return "".join(n.ljust(width) for n in names[:-1]) + names[-1]


def cross_validate(ds: Dataset, folds: FoldPlan, cfg) -> MetricReport:
    """Train/evaluate one model config across every fold of the plan.

    For fold i the model trains on all rows outside fold i (trainers fit
    any normalization on those rows internally) and is scored on fold i.
    Deterministic given (ds, folds, cfg). Trainer failures abort the run
    with the failing fold index attached.
    """
    from .models import predict_batch, train_model

    if len(folds.assignments) != ds.n_rows:
        raise MetricError("fold plan does not match dataset size")
    names = REGRESSION_METRICS if ds.task == REGRESSION else CLASSIFICATION_METRICS
    values: dict[str, list[float]] = {n: [] for n in names}
    n_classes = ds.n_classes if ds.task == CLASSIFICATION else None
    for fold in range(folds.k):
        train_rows = folds.train_rows(fold)
        test_rows = folds.test_rows(fold)
        try:
            model = train_model(ds, train_rows, cfg)
        except Exception as exc:
            raise MetricError(f"trainer failed on fold {fold}: {exc}") from exc
        pred = predict_batch(model, ds.rows[test_rows])
        fold_metrics = compute_metrics(pred, ds.target[test_rows], ds.task, n_classes)
        for name in names:
            values[name].append(fold_metrics[name])
    return MetricReport(ds.task, folds.k, {n: tuple(v) for n, v in values.items()})

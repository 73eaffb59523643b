"""Dataset-level automation: correlation, experiments, feature importance."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, make_folds
from .metrics import MetricReport, compute_metrics, cross_validate, render_header
from .models import (ForestModel, Leaf, ModelConfig, SplitNode, config_label,
                     predict_batch, train_model)


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pairwise Pearson coefficients over all feature columns plus the
    target column (the last name). Constant columns correlate 0 with
    everything by convention and are flagged."""

    names: tuple[str, ...]
    matrix: np.ndarray
    constant: tuple[bool, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# pairwise Pearson correlation; includes the target column\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["column"] + list(self.names))
        for i, name in enumerate(self.names):
            writer.writerow([name] + [repr(float(v)) for v in self.matrix[i]])
        return buf.getvalue()


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation with the Cauchy-Schwarz equality case explicit.

    Exactly collinear columns (equal centered residuals up to sign and
    scale, as floats) report exactly +/-1.0, and results never leave
    [-1, 1]. Constant columns return 0.0 by convention.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ra = a - a.mean()
    rb = b - b.mean()
    num = float(np.dot(ra, rb))
    na = float(np.dot(ra, ra))
    nb = float(np.dot(rb, rb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    if num * num >= na * nb:
        return 1.0 if num > 0 else -1.0
    return num / math.sqrt(na * nb)


def correlation_matrix(ds: Dataset) -> CorrelationMatrix:
    if ds.n_rows < 2:
        raise AnalysisError("need at least 2 rows for correlation")
    columns = [ds.rows[:, j] for j in range(ds.n_features)]
    columns.append(ds.target.astype(np.float64))
    names = tuple(ds.feature_names) + (ds.target_name,)
    d = len(columns)
    matrix = np.eye(d)
    constant = [bool(np.all(col == col[0])) for col in columns]
    for i in range(d):
        for j in range(i + 1, d):
            matrix[i, j] = matrix[j, i] = pearson(columns[i], columns[j])
    return CorrelationMatrix(names, matrix, tuple(constant))


@dataclass(frozen=True)
class ExperimentEntry:
    config: ModelConfig
    report: MetricReport | None
    error: str | None


@dataclass(frozen=True)
class ExperimentResult:
    """Several configs evaluated on one dataset with a shared fold plan."""

    entries: tuple[ExperimentEntry, ...]
    task: str
    k: int
    seed: int

    def render_table(self, width: int = 17) -> str:
        lines = [render_header(self.task, width)]
        for entry in self.entries:
            if entry.report is not None:
                lines.append(entry.report.render_row(width))
        return "\n".join(lines)

    @property
    def errors(self) -> list[tuple[str, str]]:
        return [(config_label(e.config), e.error)
                for e in self.entries if e.error is not None]


def run_experiment(ds: Dataset, configs: list[ModelConfig], k: int = 10,
                   seed: int = 0) -> ExperimentResult:
    """Cross-validate every config on one shared fold plan.

    A failing config is recorded with its error; the others still report.
    """
    if not configs:
        raise AnalysisError("need at least one config")
    folds = make_folds(ds, k, seed)
    entries = []
    for cfg in configs:
        try:
            entries.append(ExperimentEntry(cfg, cross_validate(ds, folds, cfg), None))
        except Exception as exc:
            entries.append(ExperimentEntry(cfg, None, str(exc)))
    return ExperimentResult(tuple(entries), ds.task, k, seed)


@dataclass(frozen=True)
class MultiExperimentResult:
    """Entry (i, j) of each matrix: model trained on dataset i, evaluated
    on dataset j. Diagonal entries are cross-validated self-evaluations
    rather than optimistic train-equals-test scores."""

    dataset_names: tuple[str, ...]
    matrices: dict

    def to_csv(self, metric: str) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["train\\eval"] + list(self.dataset_names))
        for i, name in enumerate(self.dataset_names):
            writer.writerow([name] + [repr(float(v)) for v in self.matrices[metric][i]])
        return buf.getvalue()


def run_multi_experiment(datasets: list[Dataset], cfg: ModelConfig, k: int = 10,
                         seed: int = 0, names: list[str] | None = None) -> MultiExperimentResult:
    """Train-on-i, evaluate-on-j matrices for every metric."""
    if len(datasets) < 2:
        raise AnalysisError("need at least 2 datasets")
    first = datasets[0]
    for ds in datasets[1:]:
        if ds.feature_names != first.feature_names or ds.task != first.task:
            raise AnalysisError("datasets must share feature names and task")
        if ds.task == "classification" and ds.class_labels != first.class_labels:
            raise AnalysisError("classification datasets must share class labels")
    if names is None:
        names = [f"dataset_{i}" for i in range(len(datasets))]
    n = len(datasets)
    n_classes = first.n_classes if first.task == "classification" else None
    matrices: dict[str, np.ndarray] = {}

    def record(metric, i, j, value):
        if metric not in matrices:
            matrices[metric] = np.zeros((n, n))
        matrices[metric][i, j] = value

    for i, train_ds in enumerate(datasets):
        model = train_model(train_ds, range(train_ds.n_rows), cfg)
        diag = cross_validate(train_ds, make_folds(train_ds, k, seed), cfg)
        for metric in diag.metric_names:
            record(metric, i, i, diag.mean(metric))
        for j, eval_ds in enumerate(datasets):
            if i == j:
                continue
            pred = predict_batch(model, eval_ds.rows)
            for metric, value in compute_metrics(pred, eval_ds.target,
                                                 eval_ds.task, n_classes).items():
                record(metric, i, j, value)
    return MultiExperimentResult(tuple(names), matrices)


def feature_importance(model: ForestModel) -> np.ndarray:
    """Mean-decrease-impurity importance of a trained forest.

    Each split contributes its impurity decrease weighted by the fraction
    of that tree's training rows reaching the node; contributions are
    summed per feature across all trees and normalized to sum to 1. A
    forest without any split returns the uniform vector.
    """
    if not isinstance(model, ForestModel) or model.family != "rf":
        raise AnalysisError("feature importance is defined for trained rf models")
    totals = np.zeros(model.n_features)

    def walk(node, root_samples):
        if isinstance(node, Leaf):
            return
        weight = node.n_samples / root_samples if root_samples else 0.0
        totals[node.feature] += weight * node.impurity_decrease
        walk(node.left, root_samples)
        walk(node.right, root_samples)

    for tree in model.trees:
        root_samples = tree.n_samples if isinstance(tree, SplitNode) else 0
        walk(tree, root_samples)
    total = totals.sum()
    if total == 0.0:
        return np.full(model.n_features, 1.0 / model.n_features)
    return totals / total

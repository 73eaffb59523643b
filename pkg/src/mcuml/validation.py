"""Replay validation: compiled generated models versus the reference path.

Every dataset row is pushed through both the 64-bit reference evaluator
and the compiled artifact. Tree and pairwise-linear classifiers must
agree exactly with the width-narrowed evaluator; network outputs may
drift by ulps through the exponential, so they are checked against a
relative bound. Aggregate metric deltas quantify what the narrowing
costs end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codegen import GeneratedSource, generate, predict_narrowed
from .dataset import CLASSIFICATION, Dataset, FoldPlan, make_folds
from .metrics import MetricReport, compute_metrics
from .models import ModelConfig, TrainedModelIR, predict_batch, train_model
from .toolchain import (CompiledBinary, HostToolchain, PlatformDescriptor,
                        ReplayError, builtin_platform, parse_predictions,
                        run_replay)


class ValidationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ValidationReport:
    """Comparison of one compiled model against the reference evaluator."""

    task: str
    n_rows: int
    # classification: exact agreement with the narrowed evaluator
    agreement: float | None
    # regression: worst-case deviation from the narrowed evaluator
    max_abs_deviation: float | None
    max_rel_deviation: float | None
    metrics_reference: dict
    metrics_generated: dict
    metric_deltas: dict


def _deviations(compiled: np.ndarray, narrowed: np.ndarray):
    abs_dev = np.abs(compiled - narrowed.astype(np.float64))
    scale = np.maximum(np.maximum(np.abs(compiled), np.abs(narrowed)), 1e-9)
    return float(abs_dev.max()), float((abs_dev / scale).max())


def validate_generated(model: TrainedModelIR, ds: Dataset,
                       runner: CompiledBinary, scalar_width: int = 4,
                       inline_normalization: bool = True,
                       timeout: float = 120.0) -> ValidationReport:
    """Replay every dataset row through the compiled runner and compare."""
    if ds.n_rows == 0:
        raise ValidationError("nothing to replay: empty dataset")
    classification = ds.task == CLASSIFICATION
    lines = run_replay(runner, ds.rows, timeout=timeout)
    compiled = parse_predictions(lines, classification)
    narrowed = predict_narrowed(model, ds.rows, scalar_width, inline_normalization)
    reference = predict_batch(model, ds.rows)
    n_classes = ds.n_classes if classification else None
    ref_metrics = compute_metrics(reference, ds.target, ds.task, n_classes)
    gen_metrics = compute_metrics(compiled, ds.target, ds.task, n_classes)
    deltas = {k: abs(gen_metrics[k] - ref_metrics[k]) for k in ref_metrics}
    if classification:
        agreement = float(np.mean(compiled == narrowed))
        return ValidationReport(ds.task, ds.n_rows, agreement, None, None,
                                ref_metrics, gen_metrics, deltas)
    max_abs, max_rel = _deviations(compiled.astype(np.float64), narrowed)
    return ValidationReport(ds.task, ds.n_rows, None, max_abs, max_rel,
                            ref_metrics, gen_metrics, deltas)


@dataclass(frozen=True)
class CrossValidatedComparison:
    """Fold-wise reference vs compiled metrics, the replay-validation analog
    of a cross-validated experiment."""

    reference: MetricReport
    generated: MetricReport
    agreement: float | None
    max_rel_deviation: float | None

    def mean_deltas(self) -> dict:
        return {
            name: abs(self.generated.mean(name) - self.reference.mean(name))
            for name in self.reference.metric_names
        }


def cross_validated_comparison(ds: Dataset, cfg: ModelConfig, k: int = 10,
                               seed: int = 0,
                               platform: PlatformDescriptor | None = None,
                               scalar_width: int = 4,
                               inline_normalization: bool = True,
                               folds: FoldPlan | None = None,
                               toolchain: HostToolchain | None = None) -> CrossValidatedComparison:
    """For every fold: train, generate, compile, replay the held-out rows.

    Returns per-fold metrics for the reference evaluator and the compiled
    model side by side, plus worst-case disagreement with the narrowed
    evaluator across all folds.
    """
    platform = platform or builtin_platform("host")
    folds = folds or make_folds(ds, k, seed)
    own_toolchain = toolchain is None
    toolchain = toolchain or HostToolchain()
    classification = ds.task == CLASSIFICATION
    n_classes = ds.n_classes if classification else None
    names = None
    ref_values: dict[str, list[float]] = {}
    gen_values: dict[str, list[float]] = {}
    agree_num = 0
    total = 0
    worst_rel = 0.0
    try:
        for fold in range(folds.k):
            train_rows = folds.train_rows(fold)
            test_rows = folds.test_rows(fold)
            model = train_model(ds, train_rows, cfg)
            gs = generate(model, scalar_width, inline_normalization,
                          feature_names=ds.feature_names)
            runner = toolchain.build_replay(gs, platform)
            X = ds.rows[test_rows]
            truth = ds.target[test_rows]
            compiled = parse_predictions(
                run_replay(runner, X, timeout=platform.timeout), classification)
            narrowed = predict_narrowed(model, X, scalar_width, inline_normalization)
            reference = predict_batch(model, X)
            ref_m = compute_metrics(reference, truth, ds.task, n_classes)
            gen_m = compute_metrics(compiled, truth, ds.task, n_classes)
            if names is None:
                names = list(ref_m)
                ref_values = {n: [] for n in names}
                gen_values = {n: [] for n in names}
            for n in names:
                ref_values[n].append(ref_m[n])
                gen_values[n].append(gen_m[n])
            if classification:
                agree_num += int(np.sum(compiled == narrowed))
                total += len(test_rows)
            else:
                _, rel = _deviations(compiled.astype(np.float64), narrowed)
                worst_rel = max(worst_rel, rel)
    finally:
        if own_toolchain:
            toolchain.cleanup()
    return CrossValidatedComparison(
        reference=MetricReport(ds.task, folds.k, {n: tuple(v) for n, v in ref_values.items()}),
        generated=MetricReport(ds.task, folds.k, {n: tuple(v) for n, v in gen_values.items()}),
        agreement=(agree_num / total) if classification else None,
        max_rel_deviation=None if classification else worst_rel,
    )

"""Platform-in-the-loop model selection over a hyperparameter grid.

Every candidate is cross-validated once (training is platform
independent), retrained on the full data, lowered to C, and then built
and measured once per platform. The winner per platform is the feasible
candidate with the highest quality mean; ties break toward the smaller
measured program memory, then smaller RAM, then earlier enumeration
order. The full report table is exported so the selection can be audited
or re-plotted.
"""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .codegen import generate
from .dataset import CLASSIFICATION, Dataset, make_folds
from .estimators import MemoryEstimate, estimate_model
from .metrics import MetricReport, cross_validate
from .models import ModelConfig, config_label, make_config, train_model
from .toolchain import (CompileError, FITS, FootprintMeasurement,
                        PlatformDescriptor, check_budget)

ERRORED = "errored"
COMPILE_FAILED = "compile_failed"


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateGrid:
    """Cartesian hyperparameter grid for one model family.

    axes maps config field names to value tuples; enumeration is
    row-major in the given axis order. base holds fixed non-axis
    overrides (seeds, epochs, ...).
    """

    family: str
    axes: dict
    base: dict | None = None
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.axes:
            raise SweepError("grid needs at least one axis")
        for name, values in self.axes.items():
            values = tuple(values)
            if not values:
                raise SweepError(f"axis {name!r} is empty")
            if any((not isinstance(v, int)) or v < 1 for v in values):
                raise SweepError(f"axis {name!r} must hold positive integers")
            object.__setattr__(self, "axes", {**self.axes, name: values})


def enumerate_candidates(grid: CandidateGrid) -> list[ModelConfig]:
    """Row-major expansion of the grid into validated configs."""
    base = dict(grid.base or {})
    names = list(grid.axes)
    configs = []
    for combo in itertools.product(*(grid.axes[n] for n in names)):
        overrides = dict(zip(names, combo))
        configs.append(make_config(grid.family, **base, **overrides))
    return configs


@dataclass(frozen=True)
class CandidateReport:
    """One (config, platform) evaluation row."""

    index: int
    config: ModelConfig
    platform_name: str
    quality_mean: float | None
    quality_std: float | None
    metrics: MetricReport | None
    analytical: MemoryEstimate | None
    measurement: FootprintMeasurement | None
    failure: str | None
    verdict: str

    @property
    def feasible(self) -> bool:
        return self.verdict == FITS

    @property
    def label(self) -> str:
        return config_label(self.config)


@dataclass(frozen=True)
class SweetSpot:
    winner: CandidateReport
    runners_up: tuple[CandidateReport, ...]
    trace: tuple[str, ...]

    @property
    def found(self) -> bool:
        return True


@dataclass(frozen=True)
class NoSweetSpot:
    """Every candidate was infeasible; carries the closest miss."""

    smallest_infeasible: CandidateReport | None
    trace: tuple[str, ...]

    @property
    def found(self) -> bool:
        return False


def quality_metric_name(task: str) -> str:
    return "accuracy" if task == CLASSIFICATION else "r2"


def _ranking_key(report: CandidateReport):
    measurement = report.measurement
    return (-report.quality_mean,
            measurement.program_memory if measurement else 0,
            measurement.ram if measurement else 0,
            report.index)


def select_sweet_spot(reports: list[CandidateReport],
                      platform: PlatformDescriptor) -> SweetSpot | NoSweetSpot:
    """Pick the highest-quality feasible candidate with deterministic
    tie-breaking; returns NoSweetSpot with a diagnostic when nothing fits."""
    rows = [r for r in reports if r.platform_name == platform.name]
    if not rows:
        raise SweepError(f"no candidate reports for platform {platform.name!r}")
    trace = []
    feasible = []
    for r in rows:
        if r.verdict == ERRORED:
            trace.append(f"#{r.index} {r.label}: trainer error: {r.failure}")
        elif r.verdict == COMPILE_FAILED:
            trace.append(f"#{r.index} {r.label}: compile failed")
        elif not r.feasible:
            trace.append(f"#{r.index} {r.label}: {r.verdict} "
                         f"({r.measurement.program_memory} B program, "
                         f"{r.measurement.ram} B ram)")
        else:
            feasible.append(r)
    if not feasible:
        measured = [r for r in rows if r.measurement is not None]
        smallest = min(measured, key=lambda r: r.measurement.program_memory) \
            if measured else None
        return NoSweetSpot(smallest, tuple(trace))
    ranked = sorted(feasible, key=_ranking_key)
    winner = ranked[0]
    for r in ranked[1:]:
        trace.append(f"#{r.index} {r.label}: dominated "
                     f"(quality {r.quality_mean:.4f} vs {winner.quality_mean:.4f})")
    return SweetSpot(winner, tuple(ranked[1:]), tuple(trace))


@dataclass(frozen=True)
class SweepResult:
    reports: tuple[CandidateReport, ...]
    sweet_spots: dict
    quality_metric: str

    def for_platform(self, name: str) -> list[CandidateReport]:
        return [r for r in self.reports if r.platform_name == name]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([
            "index", "platform", "family", "config", "quality_mean",
            "quality_std", "analytical_bytes", "program_bytes", "ram_bytes",
            "verdict",
        ])
        for r in self.reports:
            writer.writerow([
                r.index, r.platform_name, r.config.family, r.label,
                "" if r.quality_mean is None else repr(r.quality_mean),
                "" if r.quality_std is None else repr(r.quality_std),
                "" if r.analytical is None else r.analytical.total_bytes,
                "" if r.measurement is None else r.measurement.program_memory,
                "" if r.measurement is None else r.measurement.ram,
                r.verdict,
            ])
        return buf.getvalue()


def _evaluate_shared(ds: Dataset, cfg: ModelConfig, folds, feature_names,
                     scalar_width: int):
    """Platform-independent half of a candidate evaluation."""
    report = cross_validate(ds, folds, cfg)
    model = train_model(ds, range(ds.n_rows), cfg)
    gs = generate(model, scalar_width, feature_names=feature_names)
    return report, model, gs, estimate_model(model, scalar_width)


def evaluate_candidate(ds: Dataset, cfg: ModelConfig,
                       platform: PlatformDescriptor, backend,
                       k: int = 10, seed: int = 0, index: int = 0,
                       scalar_width: int = 4) -> CandidateReport:
    """Full pipeline for one candidate on one platform."""
    quality = quality_metric_name(ds.task)
    folds = make_folds(ds, k, seed)
    try:
        metrics, model, gs, analytical = _evaluate_shared(
            ds, cfg, folds, ds.feature_names, scalar_width)
    except Exception as exc:
        return CandidateReport(index, cfg, platform.name, None, None, None,
                               None, None, str(exc), ERRORED)
    try:
        measurement = backend.build_and_measure(gs, model, platform)
    except CompileError as exc:
        return CandidateReport(index, cfg, platform.name,
                               metrics.mean(quality), metrics.std(quality),
                               metrics, analytical, None, str(exc), COMPILE_FAILED)
    return CandidateReport(index, cfg, platform.name,
                           metrics.mean(quality), metrics.std(quality),
                           metrics, analytical, measurement, None,
                           check_budget(measurement, platform))


def sweep(ds: Dataset, grid: CandidateGrid, platforms: list[PlatformDescriptor],
          backend, parallelism: int = 1, scalar_width: int = 4) -> SweepResult:
    """Evaluate the whole grid on every platform.

    Cross-validation, retraining and code generation happen once per
    candidate; only the compile/measure step repeats per platform.
    Candidate evaluations run on a bounded worker pool; results assemble
    in deterministic enumeration order.
    """
    if not platforms:
        raise SweepError("need at least one platform")
    names = [p.name for p in platforms]
    if len(set(names)) != len(names):
        raise SweepError("platform names must be unique")
    configs = enumerate_candidates(grid)
    folds = make_folds(ds, grid.folds, grid.seed)
    quality = quality_metric_name(ds.task)

    def run_candidate(item):
        index, cfg = item
        try:
            metrics, model, gs, analytical = _evaluate_shared(
                ds, cfg, folds, ds.feature_names, scalar_width)
        except Exception as exc:
            return [CandidateReport(index, cfg, p.name, None, None, None,
                                    None, None, str(exc), ERRORED)
                    for p in platforms]
        rows = []
        for p in platforms:
            try:
                measurement = backend.build_and_measure(gs, model, p)
            except CompileError as exc:
                rows.append(CandidateReport(index, cfg, p.name,
                                            metrics.mean(quality),
                                            metrics.std(quality), metrics,
                                            analytical, None, str(exc),
                                            COMPILE_FAILED))
                continue
            rows.append(CandidateReport(index, cfg, p.name,
                                        metrics.mean(quality),
                                        metrics.std(quality), metrics,
                                        analytical, measurement, None,
                                        check_budget(measurement, p)))
        return rows

    items = list(enumerate(configs))
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            grouped = list(pool.map(run_candidate, items))
    else:
        grouped = [run_candidate(item) for item in items]
    reports = tuple(row for group in grouped for row in group)
    spots = {p.name: select_sweet_spot(list(reports), p) for p in platforms}
    return SweepResult(reports, spots, quality)

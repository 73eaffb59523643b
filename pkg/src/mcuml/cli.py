"""Command-line interface.

Subcommands: eval, sweep, codegen, validate, analyze, synth. The typical
quick look at a dataset:

    mcuml eval -r data.csv -m rf,m5,ann

prints one metric row per model, cross-validated. Exit code 0 means the
requested pipeline completed; every error path prints a single line
starting with "error:" to stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import analysis, dataset, sweetspot, toolchain, validation
from .codegen import REPLAY, TIMING, generate, generate_replay_harness
from .estimators import estimate_model
from .metrics import render_header
from .models import config_label, default_config, make_config, train_model

DEFAULT_FOLDS = 10


class CliError(Exception):
    pass


def _load_dataset(args) -> dataset.Dataset:
    if args.regression:
        return dataset.load_csv(args.regression, dataset.REGRESSION, args.target)
    return dataset.load_csv(args.classification, dataset.CLASSIFICATION, args.target)


def _add_dataset_flags(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("-r", "--regression", metavar="CSV",
                       help="regression dataset (target defaults to last column)")
    group.add_argument("-c", "--classification", metavar="CSV",
                       help="classification dataset")
    parser.add_argument("--target", help="target column name (default: last column)")


def _parse_models(spec: str, seed: int):
    configs = []
    for name in spec.split(","):
        name = name.strip()
        if not name:
            continue
        cfg = default_config(name)
        if hasattr(cfg, "seed"):
            cfg = make_config(name, seed=seed)
        configs.append(cfg)
    if not configs:
        raise CliError("no models given")
    return configs


def _parse_axis_values(text: str) -> tuple[int, ...]:
    text = text.strip()
    if "-" in text and "," not in text:
        lo, _, hi = text.partition("-")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in text.split(","))


def _parse_grid(family: str, spec: str, folds: int, seed: int) -> sweetspot.CandidateGrid:
    axes = {}
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        name, eq, values = part.partition("=")
        if not eq:
            raise CliError(f"bad grid axis {part!r}, expected name=values")
        axes[name.strip()] = _parse_axis_values(values)
    if not axes:
        raise CliError("empty grid spec")
    base = {"seed": seed} if family in ("ann", "rf", "svm") else {}
    return sweetspot.CandidateGrid(family, axes, base, folds=folds, seed=seed)


def _resolve_platforms(names: str):
    platforms = []
    for name in names.split(","):
        name = name.strip()
        if os.path.exists(name):
            platforms.append(toolchain.load_platform(name))
        else:
            platforms.append(toolchain.builtin_platform(name))
    return platforms


def cmd_eval(args) -> int:
    ds = _load_dataset(args)
    configs = _parse_models(args.models, args.seed)
    result = analysis.run_experiment(ds, configs, k=args.folds, seed=args.seed)
    print(result.render_table())
    for label, err in result.errors:
        print(f"error: {label}: {err}", file=sys.stderr)
    return 1 if result.errors else 0


def cmd_sweep(args) -> int:
    ds = _load_dataset(args)
    grid = _parse_grid(args.family, args.grid, args.folds, args.seed)
    platforms = _resolve_platforms(args.platform)
    if args.backend == "mock":
        backend = toolchain.MockToolchain(program_offset=args.mock_offset)
    else:
        backend = toolchain.HostToolchain()
    result = sweetspot.sweep(ds, grid, platforms, backend,
                             parallelism=args.jobs)
    for platform in platforms:
        spot = result.sweet_spots[platform.name]
        if spot.found:
            w = spot.winner
            print(f"{platform.name}: sweet spot {w.label} "
                  f"quality {w.quality_mean:.4f}+/-{w.quality_std:.4f} "
                  f"program {w.measurement.program_memory} B "
                  f"ram {w.measurement.ram} B")
        else:
            diag = spot.smallest_infeasible
            extra = (f"; smallest candidate needs {diag.measurement.program_memory} B"
                     if diag is not None else "")
            print(f"{platform.name}: no sweet spot (every candidate infeasible{extra})")
        if args.verbose:
            for line in spot.trace:
                print(f"  {line}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "sweep_report.csv")
        with open(path, "w") as fh:
            fh.write(result.to_csv())
        print(f"report written to {path}")
    return 0


def cmd_codegen(args) -> int:
    ds = _load_dataset(args)
    cfg = _parse_models(args.model, args.seed)[0]
    model = train_model(ds, range(ds.n_rows), cfg)
    gs = generate(model, scalar_width=args.width,
                  inline_normalization=not args.fold_normalization,
                  feature_names=ds.feature_names)
    os.makedirs(args.out, exist_ok=True)
    outputs = {
        "model.c": gs.model_c,
        "model.h": gs.model_h,
        "harness.c": generate_replay_harness(gs, REPLAY),
        "manifest": gs.manifest_text(),
    }
    if args.timing:
        outputs["harness_timing.c"] = generate_replay_harness(gs, TIMING)
    for fname, text in outputs.items():
        with open(os.path.join(args.out, fname), "w") as fh:
            fh.write(text)
    estimate = estimate_model(model, args.width)
    print(f"wrote {', '.join(outputs)} to {args.out}")
    print(f"{config_label(cfg)}: {gs.manifest['scalar_constants']} scalar constants, "
          f"analytical {estimate.total_bytes} B")
    return 0


def cmd_validate(args) -> int:
    ds = _load_dataset(args)
    cfg = _parse_models(args.model, args.seed)[0]
    platform = _resolve_platforms(args.platform)[0]
    comparison = validation.cross_validated_comparison(
        ds, cfg, k=args.folds, seed=args.seed, platform=platform)
    names = comparison.reference.metric_names
    width = 17
    print("side".ljust(10) + render_header(ds.task, width))
    print("reference ".ljust(10) + comparison.reference.render_row(width))
    print("generated ".ljust(10) + comparison.generated.render_row(width))
    if comparison.agreement is not None:
        print(f"agreement with narrowed reference: {comparison.agreement * 100:.2f}%")
    else:
        print(f"max relative deviation from narrowed reference: "
              f"{comparison.max_rel_deviation:.3g}")
    worst = max(comparison.mean_deltas().values())
    print(f"largest metric delta: {worst:.6f}")
    return 0


def cmd_analyze(args) -> int:
    ds = _load_dataset(args)
    did_something = False
    if args.correlation:
        matrix = analysis.correlation_matrix(ds)
        with open(args.correlation, "w") as fh:
            fh.write(matrix.to_csv())
        print(f"{len(matrix.names)}x{len(matrix.names)} correlation matrix "
              f"written to {args.correlation}")
        did_something = True
    if args.importance:
        cfg = make_config("rf", seed=args.seed)
        model = train_model(ds, range(ds.n_rows), cfg)
        importance = analysis.feature_importance(model)
        for name, value in sorted(zip(ds.feature_names, importance),
                                  key=lambda kv: -kv[1]):
            print(f"{name}: {value:.4f}")
        did_something = True
    if args.multi:
        others = [dataset.load_csv(path, ds.task, args.target) for path in args.multi]
        cfg = _parse_models(args.model, args.seed)[0]
        result = analysis.run_multi_experiment([ds] + others, cfg, k=args.folds,
                                               seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        for metric in result.matrices:
            path = os.path.join(args.out, f"multi_{metric}.csv")
            with open(path, "w") as fh:
                fh.write(result.to_csv(metric))
        print(f"{len(result.dataset_names)}x{len(result.dataset_names)} matrices "
              f"written to {args.out}")
        did_something = True
    if not did_something:
        raise CliError("nothing to analyze: pass --correlation, --importance or --multi")
    return 0


def cmd_synth(args) -> int:
    spec = dataset.SynthSpec(args.spec, args.rows, args.noise)
    ds = dataset.synth_dataset(spec, args.seed)
    ds.to_csv(args.out)
    print(f"{ds.n_rows} rows x {ds.n_features} features written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcuml",
        description="train small models, generate C, measure footprints, "
                    "pick what fits the target")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="cross-validated metric table for several models")
    _add_dataset_flags(p)
    p.add_argument("-m", "--models", required=True,
                   help="comma-separated families, e.g. rf,m5,ann")
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="grid sweep with per-platform sweet spots")
    _add_dataset_flags(p)
    p.add_argument("--family", required=True, choices=["ann", "rf", "m5", "svm"])
    p.add_argument("--grid", required=True,
                   help="axis spec, e.g. 'trees=1-6;max_depth=1-15'")
    p.add_argument("--platform", default="host",
                   help="comma-separated builtin names or descriptor files")
    p.add_argument("--backend", choices=["real", "mock"], default="real")
    p.add_argument("--mock-offset", type=int, default=0,
                   help="fixed program-memory offset of the mock backend")
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="directory for the full CSV report")
    p.add_argument("-v", "--verbose", action="store_true",
                   help="print the per-candidate selection trace")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("codegen", help="emit model.c/model.h/harness.c/manifest")
    _add_dataset_flags(p)
    p.add_argument("-m", "--model", required=True, help="model family")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--width", type=int, default=4, choices=[4, 8],
                   help="bytes per emitted scalar")
    p.add_argument("--fold-normalization", action="store_true",
                   help="fold normalization into the weights instead of "
                        "emitting separate constants")
    p.add_argument("--timing", action="store_true",
                   help="also emit harness_timing.c")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_codegen)

    p = sub.add_parser("validate",
                       help="compare compiled generated code against the reference")
    _add_dataset_flags(p)
    p.add_argument("-m", "--model", required=True, help="model family")
    p.add_argument("--platform", default="host")
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("analyze", help="correlation, feature importance, "
                                       "multi-dataset matrices")
    _add_dataset_flags(p)
    p.add_argument("--correlation", metavar="OUT_CSV",
                   help="write the correlation matrix here")
    p.add_argument("--importance", action="store_true",
                   help="print forest feature importances")
    p.add_argument("--multi", nargs="+", metavar="CSV",
                   help="additional datasets for train-on-i/evaluate-on-j matrices")
    p.add_argument("-m", "--model", default="rf", help="family for --multi")
    p.add_argument("--out", default=".", help="output directory for --multi")
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("synth", help="write a synthetic benchmark dataset")
    p.add_argument("--spec", required=True,
                   choices=[dataset.LTE_REGRESSION, dataset.VEHICLE_CLASSIFICATION])
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, dataset.DatasetError, analysis.AnalysisError,
            sweetspot.SweepError, toolchain.ToolchainError,
            validation.ValidationError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

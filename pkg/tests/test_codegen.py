import re

import numpy as np
import pytest

from conftest import requires_cc
from mcuml.codegen import (CodegenError, REPLAY, TIMING, float_literal,
                           generate, generate_replay_harness, predict_narrowed)
from mcuml.dataset import CLASSIFICATION, Dataset, Normalization, REGRESSION
from mcuml.estimators import estimate_ann
from mcuml.models import (AnnModel, ForestModel, Leaf, SplitNode, make_config,
                          predict_batch, train_model)
from mcuml.models.ann import init_parameters
from mcuml.models.ir import IDENTITY, SIGMOID
from mcuml.toolchain import STRICT_CFLAGS, compile_sources

LITERAL = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?f\b")


def count_const_literals(source: str) -> int:
    """Independent count of float constants inside static const declarations."""
    total = 0
    for block in re.findall(r"static const [^;]*;", source, flags=re.DOTALL):
        total += len(LITERAL.findall(block))
    return total


def random_ann(rng, d=None, classification=False):
    d = d or int(rng.integers(1, 12))
    hidden = [int(rng.integers(1, 14)) for _ in range(int(rng.integers(1, 4)))]
    n_out = int(rng.integers(2, 8)) if classification else 1
    sizes = tuple([d] + hidden + [n_out])
    weights, biases = init_parameters(sizes, rng)
    weights = tuple(w + rng.normal(size=w.shape) for w in weights)
    norm = Normalization(rng.normal(size=d), rng.uniform(0.5, 2.0, d),
                         np.zeros(d, dtype=bool))
    return AnnModel(
        CLASSIFICATION if classification else REGRESSION, sizes,
        tuple(weights), tuple(b + 0.1 for b in biases),
        (SIGMOID,) * len(hidden) + (IDENTITY,), norm,
        output_mean=1.5, output_std=2.5,
        n_classes=n_out if classification else None)


class TestLiterals:
    def test_round_trip_random_values(self):
        rng = np.random.default_rng(0)
        values = list(rng.normal(size=200) * np.exp(rng.uniform(-30, 30, 200)))
        values += [0.0, -0.0, 1.0, -1.0, 1e-38, 3.4e38, 1.0 / 3.0]
        for v in values:
            text = float_literal(v, 4)
            assert text.endswith("f")
            assert np.float32(float(text[:-1])) == np.float32(v)

    def test_double_width(self):
        assert float(float_literal(1.0 / 3.0, 8)) == 1.0 / 3.0

    def test_non_finite_rejected(self):
        with pytest.raises(CodegenError):
            float_literal(float("inf"), 4)
        with pytest.raises(CodegenError):
            float_literal(1e39, 4)  # overflows 32-bit range


class TestAnnCodegen:
    def test_scalar_count_matches_shape_formula(self):
        rng = np.random.default_rng(1)
        for trial in range(10):
            model = random_ann(rng, classification=bool(trial % 2))
            expected = estimate_ann(model.layer_sizes).parameter_count
            folded = generate(model, inline_normalization=False)
            assert folded.manifest["scalar_constants"] == expected
            assert count_const_literals(folded.model_c) == expected
            inlined = generate(model, inline_normalization=True)
            norm = inlined.manifest["normalization_constants"]
            d = model.layer_sizes[0]
            assert norm == (2 * d if trial % 2 else 2 * d + 2)
            assert inlined.manifest["scalar_constants"] == expected + norm
            assert count_const_literals(inlined.model_c) == expected + norm

    def test_generation_deterministic(self):
        model = random_ann(np.random.default_rng(2))
        a = generate(model)
        b = generate(model)
        assert a.model_c == b.model_c and a.model_h == b.model_h

    def test_folded_matches_inlined_semantics(self):
        rng = np.random.default_rng(3)
        model = random_ann(rng, d=4)
        X = rng.normal(size=(50, 4))
        inlined = predict_narrowed(model, X, inline_normalization=True)
        folded = predict_narrowed(model, X, inline_normalization=False)
        ref = predict_batch(model, X)
        assert np.max(np.abs(inlined.astype(np.float64) - ref)) < 1e-4 * np.max(np.abs(ref))
        assert np.max(np.abs(folded.astype(np.float64) - ref)) < 1e-4 * np.max(np.abs(ref))


class TestTreeCodegen:
    def test_stump_is_single_conditional(self):
        model = ForestModel(REGRESSION, 2, (SplitNode(1, 0.5, Leaf(1.0), Leaf(2.0)),),
                            "mean")
        gs = generate(model)
        assert gs.model_c.count("if (x[") == 1
        assert "if (x[1] <= 0.5f)" in gs.model_c
        assert gs.model_c.count("} else {") == 1
        assert gs.manifest["scalar_constants"] == 3  # threshold + 2 leaf values

    def test_constant_tree_compiles_without_reading_features(self):
        model = ForestModel(REGRESSION, 2, (Leaf(4.0),), "mean")
        gs = generate(model)
        assert "(void)x;" in gs.model_c


class TestSvmCodegen:
    def test_weight_and_bias_counts(self, vehicle_small):
        model = train_model(vehicle_small, np.arange(vehicle_small.n_rows),
                            make_config("svm", seed=0))
        gs = generate(model)
        assert gs.manifest["weight_constants"] == 21 * 9
        assert gs.manifest["bias_constants"] == 21
        assert gs.manifest["scalar_constants"] == 21 * 9 + 21
        assert count_const_literals(gs.model_c) == 21 * 9 + 21


class TestHarness:
    def test_splice_points_resolved(self, lte_small):
        model = train_model(lte_small, np.arange(lte_small.n_rows),
                            make_config("rf", trees=1, max_depth=2, seed=0))
        gs = generate(model, feature_names=lte_small.feature_names)
        for mode in (REPLAY, TIMING):
            text = generate_replay_harness(gs, mode)
            assert "{{" not in text
            assert f"#define NUM_FEATURES {lte_small.n_features}" in text
        assert "TIMING_ITERATIONS 1000" in generate_replay_harness(gs, TIMING)

    def test_unknown_mode(self, lte_small):
        model = train_model(lte_small, np.arange(lte_small.n_rows),
                            make_config("rf", trees=1, max_depth=1, seed=0))
        gs = generate(model)
        with pytest.raises(CodegenError):
            generate_replay_harness(gs, "bench")


def _train_all_families(lte, vehicle):
    cases = [
        (lte, make_config("rf", trees=3, max_depth=4, seed=0)),
        (lte, make_config("m5")),
        (lte, make_config("svm", seed=0)),
        (lte, make_config("ann", hidden_layers=2, neurons=5, epochs=30, seed=0)),
        (vehicle, make_config("rf", trees=3, max_depth=4, seed=0)),
        (vehicle, make_config("svm", seed=0)),
        (vehicle, make_config("ann", hidden_layers=1, neurons=6, epochs=30,
                              learning_rate=0.2, seed=0)),
    ]
    for ds, cfg in cases:
        yield ds, train_model(ds, np.arange(ds.n_rows), cfg)


@requires_cc
class TestCompiledAgreement:
    def test_strict_profile_clean_for_every_family(self, lte_small, vehicle_small,
                                                   host_platform, host_toolchain):
        for ds, model in _train_all_families(lte_small, vehicle_small):
            gs = generate(model, feature_names=ds.feature_names)
            for mode in (REPLAY, TIMING):
                sources = {
                    "model.c": gs.model_c,
                    "model.h": gs.model_h,
                    "harness.c": generate_replay_harness(gs, mode),
                }
                binary = compile_sources(sources, host_platform,
                                         host_toolchain.workdir,
                                         extra_flags=STRICT_CFLAGS)
                assert binary.diagnostics.strip() == ""

    def test_replay_matches_narrowed_evaluator(self, lte_small, vehicle_small,
                                               host_platform, host_toolchain):
        from mcuml.toolchain import parse_predictions, run_replay

        for ds, model in _train_all_families(lte_small, vehicle_small):
            gs = generate(model, feature_names=ds.feature_names)
            binary = host_toolchain.build_replay(gs, host_platform)
            lines = run_replay(binary, ds.rows)
            assert len(lines) == ds.n_rows
            classification = gs.manifest["returns"] == "int"
            compiled = parse_predictions(lines, classification)
            narrowed = predict_narrowed(model, ds.rows)
            if classification:
                agreement = float(np.mean(compiled == narrowed))
                if model.family in ("rf", "svm"):
                    assert agreement == 1.0
                else:
                    assert agreement > 0.99
            elif model.family == "ann":
                scale = np.maximum(np.abs(narrowed.astype(np.float64)), 1e-9)
                rel = np.abs(compiled - narrowed.astype(np.float64)) / scale
                assert rel.max() <= 1e-4
            else:
                # pure comparisons and sequential float arithmetic: bit exact
                assert np.array_equal(np.float32(compiled), narrowed)

import numpy as np
import pytest

from mcuml.dataset import (CLASSIFICATION, Dataset, Normalization, REGRESSION,
                           fit_normalization)
from mcuml.models import (AnnModel, ForestModel, Hyperplane, IrError, Leaf,
                          SplitNode, SvmModel, TrainError, count_nodes,
                          make_config, model_from_json, model_to_json, predict,
                          predict_batch, train_model, tree_depth)
from mcuml.models.ann import init_parameters, loss_and_gradients
from mcuml.models.cart import VARIANCE, best_split
from mcuml.models.ir import IDENTITY, SIGMOID


def regression_ds(rng, n=80, d=3, fn=None):
    rows = rng.normal(size=(n, d))
    target = fn(rows) if fn else rows @ np.arange(1, d + 1) + 0.5
    return Dataset(tuple(f"f{i}" for i in range(d)), rows, target, REGRESSION)


def classification_ds(rng, n=80, d=2, n_classes=2, margin=4.0):
    target = rng.integers(0, n_classes, size=n)
    target[:n_classes] = np.arange(n_classes)
    rows = rng.normal(size=(n, d)) + margin * target[:, None]
    return Dataset(tuple(f"f{i}" for i in range(d)), rows, target, CLASSIFICATION,
                   class_labels=tuple(f"c{i}" for i in range(n_classes)))


class TestAnn:
    def test_parameter_count_matches_shape_formula(self):
        rng = np.random.default_rng(0)
        ds = regression_ds(rng, n=60, d=9)
        model = train_model(ds, np.arange(60),
                            make_config("ann", hidden_layers=3, neurons=12,
                                        epochs=2, seed=0))
        assert model.layer_sizes == (9, 12, 12, 12, 1)
        total = sum(w.size + b.size for w, b in zip(model.weights, model.biases))
        assert total == 445  # 12*10 + 12*13 + 12*13 + 1*13

    def test_linear_unit_recovers_slope_and_intercept(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-2, 2, size=(120, 1))
        y = 3.0 * x[:, 0] - 2.0
        ds = Dataset(("x",), x, y, REGRESSION)
        cfg = make_config("ann", hidden_layers=1, neurons=1, epochs=800,
                          learning_rate=0.1, hidden_activation="identity", seed=3)
        model = train_model(ds, np.arange(120), cfg)
        p0 = predict(model, np.array([0.0]))
        p1 = predict(model, np.array([1.0]))
        slope, intercept = p1 - p0, p0
        # oracle: closed-form least squares on noise-free data
        A = np.column_stack([x[:, 0], np.ones(120)])
        ref_slope, ref_intercept = np.linalg.lstsq(A, y, rcond=None)[0]
        assert slope == pytest.approx(ref_slope, abs=1e-3)
        assert intercept == pytest.approx(ref_intercept, abs=1e-3)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        ds = regression_ds(rng)
        cfg = make_config("ann", hidden_layers=2, neurons=4, epochs=10, seed=42)
        a = train_model(ds, np.arange(ds.n_rows), cfg)
        b = train_model(ds, np.arange(ds.n_rows), cfg)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_divergence_reports_epoch(self):
        rng = np.random.default_rng(3)
        rows = rng.normal(size=(40, 2)) * 100
        ds = Dataset(("a", "b"), rows, rows[:, 0] * 1e6, REGRESSION)
        cfg = make_config("ann", hidden_layers=2, neurons=8, epochs=500,
                          learning_rate=1.0, hidden_activation="identity", seed=0)
        with pytest.raises(TrainError, match="epoch"):
            train_model(ds, np.arange(40), cfg)

    @pytest.mark.parametrize("classification", [False, True])
    def test_gradient_matches_finite_differences(self, classification):
        rng = np.random.default_rng(4)
        sizes = (3, 4, 4, 2 if classification else 1)
        activations = (SIGMOID, SIGMOID, IDENTITY)
        weights, biases = init_parameters(sizes, rng)
        X = rng.normal(size=(5, 3))
        if classification:
            Y = np.zeros((5, 2))
            Y[np.arange(5), rng.integers(0, 2, 5)] = 1.0
        else:
            Y = rng.normal(size=(5, 1))
        _, gw, gb = loss_and_gradients(X, Y, weights, biases, activations,
                                       classification)
        h = 1e-5
        for layer in range(len(weights)):
            for arr, grad in ((weights, gw), (biases, gb)):
                flat = arr[layer].reshape(-1)
                for idx in range(0, flat.size, max(1, flat.size // 5)):
                    orig = flat[idx]
                    flat[idx] = orig + h
                    up, *_ = loss_and_gradients(X, Y, weights, biases,
                                                activations, classification)
                    flat[idx] = orig - h
                    down, *_ = loss_and_gradients(X, Y, weights, biases,
                                                  activations, classification)
                    flat[idx] = orig
                    numeric = (up - down) / (2 * h)
                    analytic = grad[layer].reshape(-1)[idx]
                    denom = max(abs(numeric), abs(analytic), 1e-8)
                    assert abs(numeric - analytic) / denom < 1e-4


class TestRf:
    def test_stump_separates(self):
        rng = np.random.default_rng(5)
        ds = classification_ds(rng, n=40, d=1, margin=10.0)
        model = train_model(ds, np.arange(40),
                            make_config("rf", trees=1, max_depth=1, seed=0))
        pred = predict_batch(model, ds.rows)
        assert np.array_equal(pred, ds.target)
        internal, leaves = count_nodes(model.trees[0])
        assert (internal, leaves) == (1, 2)

    def test_pure_node_never_splits(self):
        rows = np.arange(20, dtype=np.float64).reshape(-1, 1)
        ds = Dataset(("a",), rows, np.full(20, 7.0), REGRESSION)
        model = train_model(ds, np.arange(20),
                            make_config("rf", trees=1, max_depth=5, seed=0))
        assert isinstance(model.trees[0], Leaf)

    def test_depth_bound_holds(self, lte_small):
        model = train_model(lte_small, np.arange(lte_small.n_rows),
                            make_config("rf", trees=9, max_depth=7, seed=1))
        assert len(model.trees) == 9
        assert all(tree_depth(t) <= 7 for t in model.trees)

    def test_scale_invariance(self):
        rng = np.random.default_rng(6)
        ds = regression_ds(rng, n=100, d=3)
        cfg = make_config("rf", trees=4, max_depth=5, seed=2)
        base = train_model(ds, np.arange(100), cfg)
        for factor in (2.0, 0.5, 3.0):
            scaled_rows = ds.rows.copy()
            scaled_rows[:, 1] *= factor
            ds2 = Dataset(ds.feature_names, scaled_rows, ds.target, REGRESSION)
            scaled = train_model(ds2, np.arange(100), cfg)
            assert np.array_equal(predict_batch(base, ds.rows),
                                  predict_batch(scaled, scaled_rows))

    def test_empty_training_set(self, lte_small):
        with pytest.raises(TrainError):
            train_model(lte_small, np.array([], dtype=int),
                        make_config("rf", seed=0))


class TestM5:
    def test_linear_data_single_leaf_exact(self):
        rng = np.random.default_rng(7)
        rows = rng.normal(size=(60, 3))
        target = rows @ np.array([2.0, -1.0, 0.5]) + 4.0
        ds = Dataset(("a", "b", "c"), rows, target, REGRESSION)
        model = train_model(ds, np.arange(60), make_config("m5"))
        assert isinstance(model.trees[0], Leaf)
        pred = predict_batch(model, ds.rows)
        assert np.max(np.abs(pred - target)) < 1e-9
        # equals the normal-equations solution
        A = np.column_stack([rows, np.ones(60)])
        coef = np.linalg.solve(A.T @ A, A.T @ target)
        leaf = model.trees[0]
        assert np.max(np.abs(leaf.coefficients - coef[:-1])) < 1e-9
        assert abs(leaf.value - coef[-1]) < 1e-9

    def test_breakpoint_found_first(self):
        rng = np.random.default_rng(8)
        rows = np.column_stack([rng.uniform(-1, 1, 200), rng.uniform(-1, 1, 200)])
        target = np.where(rows[:, 1] <= 0.2, 5.0 + rows[:, 0], -5.0 - rows[:, 0])
        ds = Dataset(("a", "b"), rows, target, REGRESSION)
        model = train_model(ds, np.arange(200), make_config("m5", prune=False))
        root = model.trees[0]
        assert isinstance(root, SplitNode)
        # brute-force oracle over both features
        oracle = best_split(rows, target, [0, 1], VARIANCE)
        assert root.feature == oracle.feature == 1

    def test_classification_rejected(self, vehicle_small):
        with pytest.raises(TrainError, match="regression-only"):
            train_model(vehicle_small, np.arange(vehicle_small.n_rows),
                        make_config("m5"))

    def test_small_leaf_falls_back_to_constant(self):
        rng = np.random.default_rng(9)
        rows = rng.normal(size=(12, 8))
        target = rng.normal(size=12)
        ds = Dataset(tuple(f"f{i}" for i in range(8)), rows, target, REGRESSION)
        model = train_model(ds, np.arange(12), make_config("m5", min_leaf_size=2))
        assert any("constant fallback" in w for w in model.warnings)


class TestSvm:
    def test_two_classes_one_hyperplane(self):
        rng = np.random.default_rng(10)
        ds = classification_ds(rng, n=60, n_classes=2)
        model = train_model(ds, np.arange(60), make_config("svm", seed=0))
        assert len(model.hyperplanes) == 1

    def test_seven_classes_21_hyperplanes(self):
        rng = np.random.default_rng(11)
        ds = classification_ds(rng, n=140, n_classes=7, margin=6.0)
        model = train_model(ds, np.arange(140), make_config("svm", seed=0))
        assert len(model.hyperplanes) == 21

    def test_separable_data_fits_exactly(self):
        rng = np.random.default_rng(12)
        ds = classification_ds(rng, n=80, n_classes=2, margin=8.0)
        model = train_model(ds, np.arange(80), make_config("svm", seed=0))
        assert np.array_equal(predict_batch(model, ds.rows), ds.target)

    def test_degenerate_pair_flagged(self):
        rng = np.random.default_rng(13)
        ds = classification_ds(rng, n=90, n_classes=3, margin=6.0)
        rows = np.flatnonzero(ds.target != 2)  # train without class 2
        model = train_model(ds, rows, make_config("svm", seed=0))
        degenerate = [hp for hp in model.hyperplanes if hp.degenerate]
        assert {(hp.class_a, hp.class_b) for hp in degenerate} == {(0, 2), (1, 2)}
        assert any("single class" in w for w in model.warnings)

    def test_regression_substitution_matches_least_squares(self):
        rng = np.random.default_rng(14)
        ds = regression_ds(rng, n=70, d=2)
        model = train_model(ds, np.arange(70), make_config("svm", seed=0))
        assert any("least-squares" in w for w in model.warnings)
        A = np.column_stack([ds.rows, np.ones(70)])
        coef = np.linalg.lstsq(A, ds.target, rcond=None)[0]
        pred = predict_batch(model, ds.rows)
        assert np.max(np.abs(pred - A @ coef)) < 1e-8

    def test_deterministic(self):
        rng = np.random.default_rng(15)
        ds = classification_ds(rng, n=60, n_classes=3, margin=3.0)
        cfg = make_config("svm", seed=9)
        a = train_model(ds, np.arange(60), cfg)
        b = train_model(ds, np.arange(60), cfg)
        for ha, hb in zip(a.hyperplanes, b.hyperplanes):
            assert np.array_equal(ha.weights, hb.weights) and ha.bias == hb.bias


def _identity_norm(d):
    return Normalization(np.zeros(d), np.ones(d), np.zeros(d, dtype=bool))


class TestPredict:
    def test_forest_of_identical_trees(self):
        tree = SplitNode(0, 0.5, Leaf(1.0), Leaf(2.0))
        single = ForestModel(REGRESSION, 1, (tree,), "mean")
        triple = ForestModel(REGRESSION, 1, (tree, tree, tree), "mean")
        x = np.array([0.3])
        assert predict(single, x) == predict(triple, x)

    def test_zero_network_outputs_zero(self):
        model = AnnModel(
            REGRESSION, (2, 3, 1),
            (np.zeros((3, 2)), np.zeros((1, 3))),
            (np.zeros(3), np.zeros(1)),
            (IDENTITY, IDENTITY), _identity_norm(2))
        assert predict(model, np.array([1.0, -1.0])) == 0.0

    def test_pairwise_votes_select_winner(self):
        # class 2 wins both of its pairwise duels
        planes = (
            Hyperplane(np.zeros(1), 1.0, 0, 1),    # 0 beats 1
            Hyperplane(np.zeros(1), -1.0, 0, 2),   # 2 beats 0
            Hyperplane(np.zeros(1), -1.0, 1, 2),   # 2 beats 1
        )
        model = SvmModel(CLASSIFICATION, 1, planes, n_classes=3)
        assert predict(model, np.array([0.0])) == 2

    def test_dimension_mismatch(self):
        tree = ForestModel(REGRESSION, 2, (Leaf(1.0),), "mean")
        with pytest.raises(IrError):
            predict(tree, np.array([1.0, 2.0, 3.0]))

    def test_non_finite_input(self):
        tree = ForestModel(REGRESSION, 1, (Leaf(1.0),), "mean")
        with pytest.raises(IrError):
            predict(tree, np.array([np.nan]))


class TestIr:
    def test_serialization_round_trip(self, lte_small, vehicle_small):
        configs = [
            (lte_small, make_config("rf", trees=3, max_depth=4, seed=0)),
            (lte_small, make_config("m5")),
            (lte_small, make_config("ann", hidden_layers=1, neurons=4, epochs=5, seed=0)),
            (vehicle_small, make_config("svm", seed=0)),
        ]
        for ds, cfg in configs:
            model = train_model(ds, np.arange(ds.n_rows), cfg)
            back = model_from_json(model_to_json(model))
            assert np.array_equal(predict_batch(model, ds.rows),
                                  predict_batch(back, ds.rows))

    def test_shape_chain_enforced(self):
        with pytest.raises(IrError):
            AnnModel(REGRESSION, (2, 3, 1),
                     (np.zeros((3, 2)), np.zeros((1, 2))),  # wrong inner width
                     (np.zeros(3), np.zeros(1)),
                     (SIGMOID, IDENTITY), _identity_norm(2))

    def test_hyperplane_count_enforced(self):
        with pytest.raises(IrError):
            SvmModel(CLASSIFICATION, 2,
                     (Hyperplane(np.zeros(2), 0.0, 0, 1),), n_classes=3)

    def test_empty_forest_rejected(self):
        with pytest.raises(IrError):
            ForestModel(REGRESSION, 1, (), "mean")

import numpy as np
import pytest

from mcuml.dataset import (CLASSIFICATION, Dataset, DatasetError, REGRESSION,
                           SynthSpec, fit_normalization, load_csv, make_folds,
                           synth_dataset)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_basic_regression(self, tmp_path):
        ds = load_csv(write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n"), REGRESSION)
        assert ds.n_features == 2
        assert ds.n_rows == 3
        assert ds.feature_names == ("a", "b")
        assert np.array_equal(ds.target, [3.0, 6.0, 9.0])
        assert ds.target_name == "y"

    def test_classification_first_appearance_mapping(self, tmp_path):
        ds = load_csv(write(tmp_path, "x,cls\n1,car\n2,car\n3,bus\n"), CLASSIFICATION)
        assert np.array_equal(ds.target, [0, 0, 1])
        assert ds.class_labels == ("car", "bus")

    def test_nan_cell_rejected(self, tmp_path):
        with pytest.raises(DatasetError, match="non-finite"):
            load_csv(write(tmp_path, "a,y\nNaN,1\n2,2\n"), REGRESSION)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="no such file"):
            load_csv(tmp_path / "nope.csv", REGRESSION)

    def test_ragged_row(self, tmp_path):
        with pytest.raises(DatasetError, match="ragged"):
            load_csv(write(tmp_path, "a,b,y\n1,2,3\n4,5\n"), REGRESSION)

    def test_non_numeric_feature(self, tmp_path):
        with pytest.raises(DatasetError, match="non-numeric"):
            load_csv(write(tmp_path, "a,y\nfoo,1\n2,2\n"), REGRESSION)

    def test_single_class_rejected(self, tmp_path):
        with pytest.raises(DatasetError, match="single class"):
            load_csv(write(tmp_path, "a,cls\n1,car\n2,car\n"), CLASSIFICATION)

    def test_empty_dataset(self, tmp_path):
        with pytest.raises(DatasetError, match="empty"):
            load_csv(write(tmp_path, "a,y\n"), REGRESSION)

    def test_target_column_by_name(self, tmp_path):
        ds = load_csv(write(tmp_path, "y,a\n1,10\n2,20\n"), REGRESSION,
                      target_column="y")
        assert ds.feature_names == ("a",)
        assert np.array_equal(ds.target, [1.0, 2.0])

    def test_round_trip(self, tmp_path):
        ds = synth_dataset(SynthSpec("vehicle_classification", 70), seed=1)
        path = tmp_path / "veh.csv"
        ds.to_csv(path)
        back = load_csv(path, CLASSIFICATION)
        assert back.feature_names == ds.feature_names
        assert np.array_equal(back.rows, ds.rows)
        # first-appearance order may permute indices, labels must agree per row
        assert all(back.class_labels[back.target[i]] == ds.class_labels[ds.target[i]]
                   for i in range(ds.n_rows))


def random_dataset(rng, n, classification, n_classes=3):
    rows = rng.normal(size=(n, 2))
    if classification:
        target = rng.integers(0, n_classes, size=n)
        # make sure every class appears
        target[:n_classes] = np.arange(n_classes)
        return Dataset(("a", "b"), rows, target, CLASSIFICATION,
                       class_labels=tuple(f"c{i}" for i in range(n_classes)))
    return Dataset(("a", "b"), rows, rng.normal(size=n), REGRESSION)


class TestFolds:
    def test_leave_one_out_shape(self):
        ds = random_dataset(np.random.default_rng(0), 10, False)
        plan = make_folds(ds, 10, 0)
        assert all(len(plan.test_rows(f)) == 1 for f in range(10))

    def test_balanced_two_class_stratification(self):
        rng = np.random.default_rng(1)
        rows = rng.normal(size=(100, 2))
        target = np.array([0, 1] * 50)
        ds = Dataset(("a", "b"), rows, target, CLASSIFICATION, class_labels=("x", "y"))
        plan = make_folds(ds, 10, 3)
        for f in range(10):
            fold_targets = ds.target[plan.test_rows(f)]
            assert np.sum(fold_targets == 0) == 5
            assert np.sum(fold_targets == 1) == 5

    def test_determinism(self):
        ds = random_dataset(np.random.default_rng(2), 40, True)
        a = make_folds(ds, 5, 123)
        b = make_folds(ds, 5, 123)
        assert np.array_equal(a.assignments, b.assignments)

    def test_k_out_of_range(self):
        ds = random_dataset(np.random.default_rng(3), 5, False)
        with pytest.raises(DatasetError):
            make_folds(ds, 6, 0)
        with pytest.raises(DatasetError):
            make_folds(ds, 1, 0)

    def test_partition_and_balance_properties(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            k = int(rng.integers(2, 11))
            n = int(rng.integers(k, 120))
            classification = bool(rng.integers(0, 2))
            ds = random_dataset(rng, n, classification)
            plan = make_folds(ds, k, int(rng.integers(0, 1 << 31)))
            assert plan.assignments.min() >= 0 and plan.assignments.max() < k
            sizes = np.bincount(plan.assignments, minlength=k)
            assert sizes.sum() == n
            assert sizes.max() - sizes.min() <= 1
            if classification:
                for cls in np.unique(ds.target):
                    counts = np.bincount(plan.assignments[ds.target == cls],
                                         minlength=k)
                    assert counts.max() - counts.min() <= 1

    def test_best_effort_flag(self):
        rng = np.random.default_rng(5)
        rows = rng.normal(size=(20, 2))
        target = np.array([0] * 17 + [1] * 3)  # class 1 has fewer than k members
        ds = Dataset(("a", "b"), rows, target, CLASSIFICATION, class_labels=("x", "y"))
        plan = make_folds(ds, 5, 0)
        assert not plan.stratified


class TestNormalization:
    def test_mean_and_std(self):
        ds = Dataset(("a",), np.array([[1.0], [2.0], [3.0]]), np.zeros(3), REGRESSION)
        norm = fit_normalization(ds, np.arange(3))
        assert norm.mean[0] == 2.0
        assert norm.std[0] == pytest.approx(np.std([1.0, 2.0, 3.0]))

    def test_constant_column_flagged(self):
        ds = Dataset(("a",), np.array([[5.0], [5.0], [5.0]]), np.zeros(3), REGRESSION)
        norm = fit_normalization(ds, np.arange(3))
        assert norm.std[0] == 1.0
        assert norm.constant[0]

    def test_round_trip(self):
        rng = np.random.default_rng(6)
        ds = random_dataset(rng, 50, False)
        norm = fit_normalization(ds, np.arange(50))
        back = norm.invert(norm.apply(ds.rows))
        assert np.max(np.abs(back - ds.rows)) < 1e-12

    def test_empty_rows_rejected(self):
        ds = random_dataset(np.random.default_rng(7), 10, False)
        with pytest.raises(DatasetError):
            fit_normalization(ds, np.array([], dtype=int))

    def test_no_test_leakage(self):
        rng = np.random.default_rng(8)
        ds = random_dataset(rng, 30, False)
        train = np.arange(20)
        norm = fit_normalization(ds, train)
        perturbed = ds.rows.copy()
        perturbed[20:] += 100.0
        ds2 = Dataset(ds.feature_names, perturbed, ds.target, REGRESSION)
        norm2 = fit_normalization(ds2, train)
        assert np.array_equal(norm.mean, norm2.mean)
        assert np.array_equal(norm.std, norm2.std)


class TestSynth:
    def test_ss_identity_every_row(self):
        ds = synth_dataset(SynthSpec("lte_regression", 500), seed=11)
        rsrp = ds.rows[:, ds.feature_names.index("RSRP")]
        ss = ds.rows[:, ds.feature_names.index("SS")]
        assert np.all(ss == rsrp + 140.0)

    def test_vehicle_all_classes_present(self):
        ds = synth_dataset(SynthSpec("vehicle_classification", 700), seed=2)
        assert ds.n_classes == 7
        assert len(np.unique(ds.target)) == 7

    def test_export_deterministic(self, tmp_path):
        spec = SynthSpec("lte_regression", 120)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        synth_dataset(spec, seed=9).to_csv(a)
        synth_dataset(spec, seed=9).to_csv(b)
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_spec(self):
        with pytest.raises(DatasetError):
            SynthSpec("mystery", 100)

    def test_too_few_rows(self):
        with pytest.raises(DatasetError):
            SynthSpec("lte_regression", 10)

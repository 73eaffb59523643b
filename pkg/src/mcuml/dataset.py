"""Tabular dataset handling: CSV ingestion, fold plans, normalization, synthesis.

Datasets are immutable once constructed (array buffers are marked read-only)
and safe to share between concurrent workers. All randomness goes through
numpy's default PCG64 generator with an explicit integer seed so that fold
plans and synthetic datasets are reproducible across machines.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

REGRESSION = "regression"
CLASSIFICATION = "classification"


class DatasetError(ValueError):
    """Raised for malformed input data or invalid dataset requests."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """A column-named feature matrix with a numeric or categorical target.

    rows is an (N, d) float64 matrix, target a length-N vector: float64
    values for regression, dense class indices 0..n-1 for classification.
    class_labels maps class index -> original label string.
    """

    feature_names: tuple[str, ...]
    rows: np.ndarray
    target: np.ndarray
    task: str
    class_labels: tuple[str, ...] | None = None
    target_name: str = "target"

    def __post_init__(self):
        if self.task not in (REGRESSION, CLASSIFICATION):
            raise DatasetError(f"unknown task {self.task!r}")
        if self.rows.ndim != 2:
            raise DatasetError("rows must be a 2-D matrix")
        if len(self.rows) == 0:
            raise DatasetError("empty dataset")
        if len(self.feature_names) != self.rows.shape[1]:
            raise DatasetError("feature_names length does not match row width")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DatasetError("feature names must be unique")
        if any(not name for name in self.feature_names):
            raise DatasetError("feature names must be nonempty")
        if len(self.target) != len(self.rows):
            raise DatasetError("target length does not match row count")
        if not np.all(np.isfinite(self.rows)):
            raise DatasetError("rows contain non-finite values")
        if self.task == CLASSIFICATION:
            if self.class_labels is None or len(self.class_labels) < 2:
                raise DatasetError("classification needs at least 2 class labels")
            labels = np.unique(self.target)
            if self.target.dtype.kind not in "iu":
                raise DatasetError("classification target must hold class indices")
            if labels.min() < 0 or labels.max() >= len(self.class_labels):
                raise DatasetError("class indices out of range")
        else:
            if not np.all(np.isfinite(self.target)):
                raise DatasetError("target contains non-finite values")
        object.__setattr__(self, "rows", _freeze(np.ascontiguousarray(self.rows)))
        object.__setattr__(self, "target", _freeze(np.ascontiguousarray(self.target)))

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    @property
    def n_classes(self) -> int:
        if self.task != CLASSIFICATION:
            raise DatasetError("n_classes is only defined for classification")
        return len(self.class_labels)

    def to_csv(self, path: str | os.PathLike) -> None:
        """Write the dataset back out in the same dialect load_csv reads.

        Floats are written with repr() (shortest round-trip form), so the
        export is byte-deterministic and lossless.
        """
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(self.feature_names) + [self.target_name])
            for i in range(self.n_rows):
                cells = [repr(float(v)) for v in self.rows[i]]
                if self.task == CLASSIFICATION:
                    cells.append(self.class_labels[int(self.target[i])])
                else:
                    cells.append(repr(float(self.target[i])))
                writer.writerow(cells)


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every row to one of k folds.

    Folds partition the rows, sizes differ by at most one, and for
    classification the per-class counts per fold differ by at most one
    from an even deal. `stratified` is False when some class had fewer
    than k members and stratification was best-effort only.
    """

    k: int
    assignments: np.ndarray
    seed: int
    stratified: bool = True

    def __post_init__(self):
        object.__setattr__(self, "assignments", _freeze(np.ascontiguousarray(self.assignments)))

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


@dataclass(frozen=True)
class Normalization:
    """Per-feature shift/scale fitted on training rows only.

    Constant features keep divisor 1.0 and are flagged in `constant`.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def __post_init__(self):
        for name in ("mean", "std", "constant"):
            object.__setattr__(self, name, _freeze(np.ascontiguousarray(getattr(self, name))))

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.mean) / self.std

    def invert(self, rows: np.ndarray) -> np.ndarray:
        return rows * self.std + self.mean


def load_csv(path: str | os.PathLike, task: str, target_column: str | None = None) -> Dataset:
    """Load a comma-separated file with a header row into a Dataset.

    The target defaults to the last column and may be selected by name.
    Feature cells must parse as finite reals ('.' decimal separator).
    A classification target may hold arbitrary strings; labels are mapped
    to indices in order of first appearance.
    """
    if task not in (REGRESSION, CLASSIFICATION):
        raise DatasetError(f"unknown task {task!r}")
    if not os.path.exists(path):
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("empty dataset") from None
        header = [h.strip() for h in header]
        if target_column is None:
            target_idx = len(header) - 1
        else:
            if target_column not in header:
                raise DatasetError(f"target column {target_column!r} not in header")
            target_idx = header.index(target_column)
        feature_names = [h for i, h in enumerate(header) if i != target_idx]
        rows: list[list[float]] = []
        raw_targets: list[str] = []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise DatasetError(
                    f"ragged row at line {line_no}: expected {len(header)} cells, got {len(record)}"
                )
            feats = []
            for col, cell in enumerate(record):
                if col == target_idx:
                    raw_targets.append(cell.strip())
                    continue
                name = header[col]
                try:
                    value = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"non-numeric value at line {line_no}, column {name!r}: {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DatasetError(
                        f"non-finite value at line {line_no}, column {name!r}: {cell!r}"
                    )
                feats.append(value)
            rows.append(feats)
    if not rows:
        raise DatasetError("empty dataset")
    matrix = np.array(rows, dtype=np.float64)
    if task == REGRESSION:
        try:
            target = np.array([float(t) for t in raw_targets], dtype=np.float64)
        except ValueError:
            raise DatasetError("regression target has non-numeric cells") from None
        if not np.all(np.isfinite(target)):
            raise DatasetError("regression target has non-finite cells")
        return Dataset(tuple(feature_names), matrix, target, REGRESSION,
                       target_name=header[target_idx])
    labels: list[str] = []
    indices = np.empty(len(raw_targets), dtype=np.int64)
    label_to_idx: dict[str, int] = {}
    for i, raw in enumerate(raw_targets):
        if raw not in label_to_idx:
            label_to_idx[raw] = len(labels)
            labels.append(raw)
        indices[i] = label_to_idx[raw]
    if len(labels) < 2:
        raise DatasetError("classification target has a single class")
    return Dataset(tuple(feature_names), matrix, indices, CLASSIFICATION,
                   class_labels=tuple(labels), target_name=header[target_idx])


def make_folds(ds: Dataset, k: int, seed: int) -> FoldPlan:
    """Build a deterministic k-fold plan, stratified for classification.

    Rows are shuffled once and dealt round-robin. For classification the
    deal runs class by class while carrying the fold pointer forward, so
    per-class counts per fold and overall fold sizes both stay within one
    of an even split.
    """
    n = ds.n_rows
    if k < 2:
        raise DatasetError("k must be at least 2")
    if k > n:
        raise DatasetError(f"k={k} exceeds row count {n}")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n, dtype=np.int64)
    if ds.task == REGRESSION:
        order = rng.permutation(n)
        assignments[order] = np.arange(n) % k
        return FoldPlan(k, assignments, seed)
    stratified = True
    position = 0
    for cls in range(ds.n_classes):
        members = np.flatnonzero(ds.target == cls)
        if len(members) < k:
            stratified = False
        members = rng.permutation(members)
        for idx in members:
            assignments[idx] = position % k
            position += 1
    return FoldPlan(k, assignments, seed, stratified=stratified)


def fit_normalization(ds: Dataset, train_rows: np.ndarray) -> Normalization:
    """Fit per-feature mean/std on the given training rows only."""
    train_rows = np.asarray(train_rows)
    if len(train_rows) == 0:
        raise DatasetError("cannot fit normalization on an empty row set")
    sub = ds.rows[train_rows]
    mean = sub.mean(axis=0)
    std = sub.std(axis=0)
    constant = std == 0.0
    std = np.where(constant, 1.0, std)
    return Normalization(mean, std, constant)


# --- synthetic benchmark datasets -------------------------------------------

LTE_REGRESSION = "lte_regression"
VEHICLE_CLASSIFICATION = "vehicle_classification"

VEHICLE_CLASSES = (
    "Passenger car",
    "Passenger car with trailer",
    "Van",
    "Truck",
    "Truck with trailer",
    "Semitruck",
    "Bus",
)

# Stylized per-link attenuation prototypes (dB) for the seven vehicle
# classes over the nine radio links of a 3+3 node roadside installation.
# The real system records RSSI time series per link; here each link is
# reduced to one attenuation summary value, which is a documented
# simplification. Prototypes are spaced so the classes are separable at
# the default noise level.
_VEHICLE_PROTOTYPES = np.array(
    [
        [4, 6, 5, 3, 2, 3, 4, 5, 3],      # Passenger car
        [5, 7, 6, 4, 9, 11, 9, 6, 4],     # Passenger car with trailer
        [9, 11, 10, 8, 7, 8, 9, 10, 8],   # Van
        [14, 17, 16, 13, 12, 13, 14, 15, 13],  # Truck
        [15, 18, 17, 14, 20, 23, 21, 16, 14],  # Truck with trailer
        [19, 23, 22, 18, 17, 18, 20, 22, 19],  # Semitruck
        [12, 13, 13, 12, 12, 12, 13, 13, 12],  # Bus
    ],
    dtype=np.float64,
)

_LTE_FREQUENCIES = (796.0, 1815.0, 2650.0)


@dataclass(frozen=True)
class SynthSpec:
    """Request for one of the built-in synthetic benchmark datasets."""

    name: str
    n_rows: int
    noise: float = 1.0

    def __post_init__(self):
        if self.name not in (LTE_REGRESSION, VEHICLE_CLASSIFICATION):
            raise DatasetError(f"unknown synthetic spec {self.name!r}")
        if self.n_rows < 50:
            raise DatasetError("synthetic datasets need at least 50 rows")
        if self.noise < 0:
            raise DatasetError("noise level must be nonnegative")


def synth_dataset(spec: SynthSpec, seed: int) -> Dataset:
    """Generate one of the two built-in benchmark datasets.

    lte_regression mimics smartphone cellular link measurements: RSRP is
    drawn as integer dBm and SS is RSRP + 140 exactly (the OS-reported
    strength unit), so the two columns are perfectly linearly dependent.
    The data-rate target is a documented nonlinear function of SINR,
    payload size and velocity plus Gaussian noise.

    vehicle_classification draws 9 per-link attenuation summaries around
    one of seven class prototypes.
    """
    if isinstance(spec, str):
        raise DatasetError("pass a SynthSpec, e.g. SynthSpec('lte_regression', 1000)")
    rng = np.random.default_rng(seed)
    if spec.name == LTE_REGRESSION:
        return _synth_lte(spec, rng)
    return _synth_vehicle(spec, rng)


def _synth_lte(spec: SynthSpec, rng: np.random.Generator) -> Dataset:
    n = spec.n_rows
    rsrp = rng.integers(-115, -75, size=n, endpoint=True).astype(np.float64)
    # Nudge a few rows by -1 dBm so the column sum is divisible by n. The
    # column mean is then an exact integer in float arithmetic, which keeps
    # the SS = RSRP + 140 identity exact all the way through correlation.
    rem = int(rsrp.sum()) % n
    if rem:
        rsrp[:rem] -= 1.0
    ss = rsrp + 140.0
    sinr = np.clip(0.55 * (rsrp + 115.0) + rng.normal(0.0, 3.0, n), -6.0, 32.0)
    rsrq = np.clip(-19.0 + 0.16 * (rsrp + 115.0) + rng.normal(0.0, 1.2, n), -20.0, -3.0)
    cqi = np.clip(np.round(1.0 + (sinr + 6.0) * (14.0 / 38.0) + rng.normal(0.0, 1.0, n)), 1, 15)
    ta = rng.integers(0, 30, size=n).astype(np.float64)
    velocity = rng.uniform(0.0, 140.0, n)
    cell_id = rng.integers(1, 40, size=n).astype(np.float64)
    frequency = rng.choice(_LTE_FREQUENCIES, size=n)
    payload = np.round(rng.uniform(0.1, 8.0, n), 3)
    rate = (
        (3.0 + 24.0 / (1.0 + np.exp(-(sinr - 9.0) / 5.0)))
        * (payload / (payload + 1.2))
        * (1.0 - 0.0012 * velocity)
    )
    rate = np.maximum(rate + rng.normal(0.0, 1.6 * spec.noise, n), 0.05)
    names = ("RSRP", "SS", "RSRQ", "SINR", "CQI", "TA",
             "velocity", "cellId", "frequency", "payload")
    rows = np.column_stack([rsrp, ss, rsrq, sinr, cqi, ta,
                            velocity, cell_id, frequency, payload])
    return Dataset(names, rows, rate, REGRESSION, target_name="data_rate")


def _synth_vehicle(spec: SynthSpec, rng: np.random.Generator) -> Dataset:
    n = spec.n_rows
    n_classes = len(VEHICLE_CLASSES)
    # balanced class counts, remainder spread over the first classes
    counts = np.full(n_classes, n // n_classes)
    counts[: n % n_classes] += 1
    labels = np.concatenate([np.full(c, i, dtype=np.int64) for i, c in enumerate(counts)])
    labels = rng.permutation(labels)
    rows = _VEHICLE_PROTOTYPES[labels] + rng.normal(0.0, 1.1 * spec.noise, (n, 9))
    names = tuple(f"link{i}_attenuation" for i in range(1, 10))
    return Dataset(names, rows, labels, CLASSIFICATION,
                   class_labels=VEHICLE_CLASSES, target_name="vehicle_class")

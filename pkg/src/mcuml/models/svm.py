"""Linear SVM training via sequential minimal optimization.

Classification trains one binary soft-margin classifier per class pair
(one-vs-one) with a simplified SMO loop over the dual variables; the
linear kernel lets the primal weight vector be maintained incrementally.
Features are z-scored for optimization stability and the normalization is
folded back into each hyperplane afterwards, so the stored model operates
on raw feature space.

Regression substitutes a single least-squares linear model (flagged on
the returned model).
"""

from __future__ import annotations

import numpy as np

from ..dataset import CLASSIFICATION, Dataset, fit_normalization
from .config import SvmConfig
from .ir import Hyperplane, SvmModel
from .rf import TrainError

# hard cap on full SMO sweeps so pathological pairs cannot spin forever
_MAX_TOTAL_SWEEPS = 400
_ALPHA_STEP_MIN = 1e-7


def _smo_binary(X: np.ndarray, y: np.ndarray, C: float, tol: float,
                max_passes: int, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Train one binary classifier, labels in {-1, +1}.

    Returns (w, b) such that the decision function is w . x + b.
    """
    n, d = X.shape
    alphas = np.zeros(n)
    w = np.zeros(d)
    b = 0.0
    passes = 0
    sweeps = 0
    while passes < max_passes and sweeps < _MAX_TOTAL_SWEEPS:
        sweeps += 1
        changed = 0
        for i in range(n):
            Ei = float(X[i] @ w + b - y[i])
            if not ((y[i] * Ei < -tol and alphas[i] < C)
                    or (y[i] * Ei > tol and alphas[i] > 0)):
                continue
            j = int(rng.integers(0, n - 1))
            if j >= i:
                j += 1
            Ej = float(X[j] @ w + b - y[j])
            ai_old, aj_old = alphas[i], alphas[j]
            if y[i] != y[j]:
                L, H = max(0.0, aj_old - ai_old), min(C, C + aj_old - ai_old)
            else:
                L, H = max(0.0, ai_old + aj_old - C), min(C, ai_old + aj_old)
            if L >= H:
                continue
            kii = float(X[i] @ X[i])
            kjj = float(X[j] @ X[j])
            kij = float(X[i] @ X[j])
            eta = 2.0 * kij - kii - kjj
            if eta >= 0:
                continue
            aj = np.clip(aj_old - y[j] * (Ei - Ej) / eta, L, H)
            if abs(aj - aj_old) < _ALPHA_STEP_MIN:
                continue
            ai = ai_old + y[i] * y[j] * (aj_old - aj)
            alphas[i], alphas[j] = ai, aj
            w = w + y[i] * (ai - ai_old) * X[i] + y[j] * (aj - aj_old) * X[j]
            b1 = b - Ei - y[i] * (ai - ai_old) * kii - y[j] * (aj - aj_old) * kij
            b2 = b - Ej - y[i] * (ai - ai_old) * kij - y[j] * (aj - aj_old) * kjj
            if 0 < ai < C:
                b = b1
            elif 0 < aj < C:
                b = b2
            else:
                b = (b1 + b2) / 2.0
            changed += 1
        passes = passes + 1 if changed == 0 else 0
    return w, b


def _fold_normalization(w: np.ndarray, b: float, mean: np.ndarray,
                        std: np.ndarray) -> tuple[np.ndarray, float]:
    """Rewrite w.((x - mean)/std) + b as w'.x + b' over raw features."""
    w_raw = w / std
    b_raw = b - float(np.sum(w * mean / std))
    return w_raw, b_raw


def train_svm(ds: Dataset, rows: np.ndarray, cfg: SvmConfig) -> SvmModel:
    cfg.validate()
    rows = np.asarray(rows)
    if len(rows) == 0:
        raise TrainError("empty training set")
    norm = fit_normalization(ds, rows)
    X = norm.apply(ds.rows[rows])
    warnings: list[str] = []
    if ds.task != CLASSIFICATION:
        # least-squares linear model stands in for regression
        warnings.append("regression: least-squares linear model substituted for SVM")
        A = np.column_stack([X, np.ones(len(X))])
        coef, *_ = np.linalg.lstsq(A, ds.target[rows], rcond=None)
        w, b = _fold_normalization(coef[:-1], float(coef[-1]), norm.mean, norm.std)
        return SvmModel(task=ds.task, n_features=ds.n_features,
                        hyperplanes=(Hyperplane(w, b),), warnings=tuple(warnings))
    y = ds.target[rows].astype(np.int64)
    n_classes = ds.n_classes
    planes = []
    for a in range(n_classes):
        for bcls in range(a + 1, n_classes):
            mask = (y == a) | (y == bcls)
            pair_n = int(mask.sum())
            present = np.unique(y[mask])
            if len(present) < 2:
                # degenerate pair: always vote for the class that is present
                # (class_a when neither is)
                majority_is_a = pair_n == 0 or present[0] == a
                bias = 1.0 if majority_is_a else -1.0
                warnings.append(
                    f"pair ({a},{bcls}) has a single class: fixed vote hyperplane"
                )
                planes.append(Hyperplane(np.zeros(ds.n_features), bias, a, bcls,
                                         degenerate=True))
                continue
            labels = np.where(y[mask] == a, 1.0, -1.0)
            rng = np.random.default_rng([cfg.seed, a, bcls])
            w, b = _smo_binary(X[mask], labels, cfg.regularization,
                               cfg.tolerance, cfg.max_passes, rng)
            w, b = _fold_normalization(w, b, norm.mean, norm.std)
            planes.append(Hyperplane(w, b, a, bcls))
    return SvmModel(task=ds.task, n_features=ds.n_features,
                    hyperplanes=tuple(planes), n_classes=n_classes,
                    warnings=tuple(warnings))

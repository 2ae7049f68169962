"""Malignancy classification: L2-regularized logistic regression over
structure features, patient-level max aggregation, and non-parametric
ROC/AUC with threshold metrics.

A patient with several nodules is scored by the maximum nodule probability,
so the patient is called benign only when every nodule is.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FeatureVector:
    """Feature values for one nodule; ``None`` marks a missing value."""

    values: tuple[float | None, ...]
    nodule_id: str = ""
    patient_id: str = ""


@dataclass(frozen=True)
class LogisticModel:
    weights: tuple[float, ...]
    bias: float
    feature_means: tuple[float, ...]
    feature_sds: tuple[float, ...]
    impute_values: tuple[float, ...]
    feature_names: tuple[str, ...] = ()
    train_patient_ids: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class RocCurve:
    points: tuple[tuple[float, float], ...]  # (FPR, TPR), staircase from (0,0) to (1,1)
    auc: float


@dataclass(frozen=True)
class ThresholdMetrics:
    accuracy: float
    precision: float | None
    recall: float
    f1: float


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _design_matrix(rows, impute_values=None):
    """Stack feature vectors, filling missing values.

    Without preset ``impute_values``, each column's gaps are filled with its
    observed maximum plus one SD ("far away" for distances, the only feature
    that can be absent).
    """
    X = np.array([[np.nan if v is None else float(v) for v in r.values] for r in rows],
                 dtype=float)
    k = X.shape[1]
    if impute_values is None:
        impute_values = np.empty(k)
        for j in range(k):
            col = X[:, j]
            seen = col[~np.isnan(col)]
            if seen.size == 0:
                raise ValueError(f"feature column {j} has no observed values")
            sd = seen.std(ddof=1) if seen.size > 1 else 0.0
            impute_values[j] = seen.max() + sd
    else:
        impute_values = np.asarray(impute_values, dtype=float)
    for j in range(k):
        col = X[:, j]
        col[np.isnan(col)] = impute_values[j]
    return X, impute_values


def fit(training, labels, l2: float = 1e-4, balanced: bool = False, feature_names=(),
        train_patient_ids=(), meta=None, max_iter: int = 500, tol: float = 1e-6,
        ) -> LogisticModel:
    """Fit by Newton iterations on the penalized mean log-loss.

    Deterministic: zero initialization, fixed iteration cap, convergence at
    gradient max-norm < ``tol``. The penalty applies to the weights only, so
    duplicating every row leaves the optimum unchanged. ``balanced`` weights
    samples by inverse class frequency (off by default).
    """
    rows = list(training)
    y = np.asarray(labels, dtype=float)
    if len(rows) != len(y):
        raise ValueError("training rows and labels differ in length")
    if l2 < 0:
        raise ValueError(f"l2 must be nonnegative, got {l2}")
    classes, counts = np.unique(y, return_counts=True)
    if not set(classes) <= {0.0, 1.0} or len(classes) < 2 or counts.min() < 2:
        raise ValueError("training needs at least 2 examples of each class (labels 0/1)")

    X, impute_values = _design_matrix(rows)
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=0)
    if (sds == 0).any():
        bad = [i for i, s in enumerate(sds) if s == 0]
        raise ValueError(f"constant feature column(s) {bad} cannot be standardized")
    Z = (X - means) / sds

    n, k = Z.shape
    sw = np.ones(n)
    if balanced:
        n_pos = float((y == 1).sum())
        sw = np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * (n - n_pos)))
    sw = sw / sw.sum()
    w = np.zeros(k)
    b = 0.0

    def objective(w, b):
        z = Z @ w + b
        nll = np.logaddexp(0.0, -z) * y + np.logaddexp(0.0, z) * (1 - y)
        return float(sw @ nll) + 0.5 * l2 * float(w @ w)

    for _ in range(max_iter):
        p = _sigmoid(Z @ w + b)
        gw = Z.T @ (sw * (p - y)) + l2 * w
        gb = float(sw @ (p - y))
        if max(np.abs(gw).max(initial=0.0), abs(gb)) < tol:
            break
        r = sw * p * (1.0 - p)
        Za = np.hstack([Z, np.ones((n, 1))])
        H = Za.T @ (Za * r[:, None])
        H[:k, :k] += l2 * np.eye(k)
        H += 1e-12 * np.eye(k + 1)
        step = np.linalg.solve(H, np.concatenate([gw, [gb]]))
        # halve the step until the objective actually decreases
        base = objective(w, b)
        scale = 1.0
        for _ in range(50):
            w_new = w - scale * step[:k]
            b_new = b - scale * step[k]
            if objective(w_new, b_new) <= base:
                break
            scale *= 0.5
        w, b = w_new, b_new

    return LogisticModel(
        weights=tuple(float(v) for v in w),
        bias=float(b),
        feature_means=tuple(float(v) for v in means),
        feature_sds=tuple(float(v) for v in sds),
        impute_values=tuple(float(v) for v in impute_values),
        feature_names=tuple(feature_names),
        train_patient_ids=tuple(train_patient_ids),
        meta=dict(meta or {}),
    )


def predict_proba(model: LogisticModel, x: FeatureVector) -> float:
    """Malignancy probability for one feature vector."""
    return float(predict_proba_batch(model, [x])[0])


def predict_proba_batch(model: LogisticModel, rows) -> np.ndarray:
    rows = list(rows)
    for r in rows:
        if len(r.values) != model.n_features:
            raise ValueError(
                f"feature arity mismatch: model has {model.n_features}, row has {len(r.values)}")
    X, _ = _design_matrix(rows, impute_values=model.impute_values)
    Z = (X - np.array(model.feature_means)) / np.array(model.feature_sds)
    return _sigmoid(Z @ np.array(model.weights) + model.bias)


def patient_aggregate(nodule_probs: dict) -> dict:
    """Patient-level probability: the maximum over that patient's nodules."""
    out = {}
    for patient, probs in nodule_probs.items():
        probs = list(probs)
        if not probs:
            raise ValueError(f"patient {patient} has no nodule probabilities")
        out[patient] = max(probs)
    return out


def roc_and_auc(scores, labels) -> RocCurve:
    """ROC points at every distinct score (ties grouped) and trapezoid AUC.

    The AUC is accumulated in integer count units, so it equals the
    Mann-Whitney pair statistic with ties counted 1/2, exactly.
    """
    scores = np.asarray(list(scores), dtype=float)
    labels = np.asarray(list(labels), dtype=int)
    if scores.shape != labels.shape or scores.size == 0:
        raise ValueError("scores and labels must be equal-length and nonempty")
    pos = int((labels == 1).sum())
    neg = int((labels == 0).sum())
    if pos == 0 or neg == 0:
        raise ValueError("ROC needs both classes present")

    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    y_sorted = labels[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    area2 = 0  # twice the area, in count units
    i = 0
    n = scores.size
    while i < n:
        j = i
        while j < n and s_sorted[j] == s_sorted[i]:
            j += 1
        d_tp = int((y_sorted[i:j] == 1).sum())
        d_fp = (j - i) - d_tp
        area2 += d_fp * (2 * tp + d_tp)
        tp += d_tp
        fp += d_fp
        points.append((fp / neg, tp / pos))
        i = j
    return RocCurve(points=tuple(points), auc=area2 / (2 * pos * neg))


def threshold_metrics(scores, labels, threshold: float = 0.5) -> ThresholdMetrics:
    """Accuracy/precision/recall/F1 with positive = score >= threshold.

    With no predicted positives the precision is undefined (None) and F1
    falls back to 0.
    """
    scores = np.asarray(list(scores), dtype=float)
    labels = np.asarray(list(labels), dtype=int)
    pred = scores >= threshold
    tp = int((pred & (labels == 1)).sum())
    fp = int((pred & (labels == 0)).sum())
    fn = int((~pred & (labels == 1)).sum())
    tn = int((~pred & (labels == 0)).sum())
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    if precision is None or precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ThresholdMetrics(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


# ---------------------------------------------------------------------------
# Persistence


def model_to_dict(model: LogisticModel) -> dict:
    return {
        "weights": list(model.weights),
        "bias": model.bias,
        "feature_means": list(model.feature_means),
        "feature_sds": list(model.feature_sds),
        "impute_values": list(model.impute_values),
        "feature_names": list(model.feature_names),
        "train_patient_ids": list(model.train_patient_ids),
        "meta": model.meta,
    }


def model_from_dict(payload: dict) -> LogisticModel:
    return LogisticModel(
        weights=tuple(payload["weights"]),
        bias=float(payload["bias"]),
        feature_means=tuple(payload["feature_means"]),
        feature_sds=tuple(payload["feature_sds"]),
        impute_values=tuple(payload["impute_values"]),
        feature_names=tuple(payload.get("feature_names", ())),
        train_patient_ids=tuple(payload.get("train_patient_ids", ())),
        meta=dict(payload.get("meta", {})),
    )


def save_model(path: str, model: LogisticModel) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)


def load_model(path: str) -> LogisticModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))

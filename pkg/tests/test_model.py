import numpy as np
import pytest

from perinodular.model import (
    FeatureVector,
    fit,
    load_model,
    model_from_dict,
    model_to_dict,
    patient_aggregate,
    predict_proba,
    predict_proba_batch,
    roc_and_auc,
    save_model,
    threshold_metrics,
)


def rows_from(values):
    return [FeatureVector(values=tuple(np.atleast_1d(v)), nodule_id=f"n{i}")
            for i, v in enumerate(values)]


def mann_whitney_auc(scores, labels):
    """Pair-counting oracle with ties worth one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


# ---------------------------------------------------------------------------
# fitting


def test_fit_separable_1d():
    rng = np.random.default_rng(0)
    xs = np.concatenate([rng.normal(-1.0, 0.1, 50), rng.normal(1.0, 0.1, 50)])
    ys = [0] * 50 + [1] * 50
    model = fit(rows_from(xs), ys)
    probs = predict_proba_batch(model, rows_from(xs))
    accuracy = np.mean((probs >= 0.5) == np.array(ys))
    assert accuracy >= 0.99
    assert model.weights[0] > 0


def test_fit_uninformative_feature_small_weight():
    rng = np.random.default_rng(1)
    xs = rng.normal(size=200)
    ys = ([0, 1] * 100)[:200]  # label independent of the feature by construction
    model = fit(rows_from(xs), ys)
    assert abs(model.weights[0]) < 0.1


def test_fit_duplication_invariance():
    rng = np.random.default_rng(2)
    xs = np.concatenate([rng.normal(-0.5, 0.6, 30), rng.normal(0.7, 0.6, 30)])
    ys = [0] * 30 + [1] * 30
    rows = rows_from(xs)
    base = fit(rows, ys)
    doubled = fit(rows + rows, ys + ys)
    p1 = predict_proba_batch(base, rows)
    p2 = predict_proba_batch(doubled, rows)
    assert np.allclose(p1, p2, atol=1e-6)


def test_fit_rejects_single_class_and_constant_feature():
    xs = [0.1, 0.4, 0.9, 1.2]
    with pytest.raises(ValueError):
        fit(rows_from(xs), [1, 1, 1, 1])
    with pytest.raises(ValueError):
        fit(rows_from([1.0, 1.0, 1.0, 1.0]), [0, 0, 1, 1])


def test_fit_converges_gradient_norm():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 3))
    w_true = np.array([1.0, -2.0, 0.5])
    ys = (1 / (1 + np.exp(-(X @ w_true))) > rng.random(80)).astype(int)
    if ys.sum() < 2 or ys.sum() > 78:
        ys[:2] = [0, 1]
    rows = [FeatureVector(values=tuple(r)) for r in X]
    model = fit(rows, ys, l2=1e-4)
    # recompute the penalized gradient at the reported optimum
    Z = (X - np.array(model.feature_means)) / np.array(model.feature_sds)
    p = 1 / (1 + np.exp(-(Z @ np.array(model.weights) + model.bias)))
    gw = Z.T @ (p - ys) / len(ys) + 1e-4 * np.array(model.weights)
    gb = (p - ys).mean()
    assert max(np.abs(gw).max(), abs(gb)) < 1e-5


def test_fit_affine_rescaling_invariance():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 2))
    ys = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
    rows = [FeatureVector(values=tuple(r)) for r in X]
    scaled = [FeatureVector(values=(r[0] * 100.0 + 5.0, r[1])) for r in X]
    m1 = fit(rows, ys)
    m2 = fit(scaled, ys)
    p1 = predict_proba_batch(m1, rows)
    p2 = predict_proba_batch(m2, scaled)
    assert np.allclose(p1, p2, atol=1e-6)


def test_missing_values_imputed_far():
    # absent distances are filled with column max + 1 SD at fit time and the
    # stored value is reused at prediction time
    values = [(1.0,), (2.0,), (3.0,), (None,), (1.5,), (2.5,), (None,), (3.5,)]
    ys = [0, 0, 0, 1, 0, 0, 1, 0]
    rows = [FeatureVector(values=v) for v in values]
    model = fit(rows, ys)
    seen = np.array([1.0, 2.0, 3.0, 1.5, 2.5, 3.5])
    expected = seen.max() + seen.std(ddof=1)
    assert model.impute_values[0] == pytest.approx(expected)
    p_missing = predict_proba(model, FeatureVector(values=(None,)))
    p_far = predict_proba(model, FeatureVector(values=(expected,)))
    assert p_missing == pytest.approx(p_far, abs=1e-12)


def test_balanced_flag_changes_fit():
    xs = np.concatenate([np.linspace(-2, 0.5, 90), np.linspace(-0.5, 2, 10)])
    ys = [0] * 90 + [1] * 10
    plain = fit(rows_from(xs), ys)
    weighted = fit(rows_from(xs), ys, balanced=True)
    assert plain.bias != weighted.bias


# ---------------------------------------------------------------------------
# prediction


def test_predict_boundary_half():
    model = fit(rows_from([-1.0, -0.5, 0.5, 1.0]), [0, 0, 1, 1])
    # solve for the feature value that zeroes the logit
    x_star = model.feature_means[0] - model.bias * model.feature_sds[0] / model.weights[0]
    assert predict_proba(model, FeatureVector(values=(x_star,))) == pytest.approx(0.5)


def test_predict_monotone_in_positive_weight():
    model = fit(rows_from([-1.0, -0.5, 0.5, 1.0]), [0, 0, 1, 1])
    assert model.weights[0] > 0
    probs = [predict_proba(model, FeatureVector(values=(v,))) for v in (-2.0, 0.0, 2.0)]
    assert probs[0] < probs[1] < probs[2]


def test_predict_arity_mismatch():
    model = fit(rows_from([-1.0, -0.5, 0.5, 1.0]), [0, 0, 1, 1])
    with pytest.raises(ValueError):
        predict_proba(model, FeatureVector(values=(1.0, 2.0)))


# ---------------------------------------------------------------------------
# patient aggregation


def test_aggregate_max():
    assert patient_aggregate({"p": [0.2, 0.9, 0.4]}) == {"p": 0.9}


def test_aggregate_single():
    assert patient_aggregate({"p": [0.3]}) == {"p": 0.3}


def test_aggregate_empty_patient():
    with pytest.raises(ValueError):
        patient_aggregate({"p": []})


def test_aggregate_respects_mil_rule():
    # the patient is benign only when every nodule is benign
    probs = {"all_benign": [0.1, 0.2, 0.3],
             "one_malignant": [0.1, 0.9, 0.2],
             "all_malignant": [0.8, 0.9]}
    agg = patient_aggregate(probs)
    called = {p: v >= 0.5 for p, v in agg.items()}
    assert called == {"all_benign": False, "one_malignant": True, "all_malignant": True}


def test_aggregate_permutation_and_duplicates():
    probs = [0.4, 0.1, 0.7]
    assert patient_aggregate({"p": probs}) == patient_aggregate({"p": probs[::-1]})
    assert patient_aggregate({"p": probs + probs}) == patient_aggregate({"p": probs})


# ---------------------------------------------------------------------------
# ROC / AUC


def test_roc_known_case():
    roc = roc_and_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    assert roc.auc == pytest.approx(0.75)


def test_roc_perfect_and_tied():
    assert roc_and_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]).auc == 1.0
    assert roc_and_auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]).auc == 0.5


def test_roc_staircase_shape():
    rng = np.random.default_rng(5)
    scores = rng.random(40)
    labels = rng.integers(0, 2, 40)
    if labels.sum() in (0, 40):
        labels[:2] = [0, 1]
    roc = roc_and_auc(scores, labels)
    assert roc.points[0] == (0.0, 0.0)
    assert roc.points[-1] == (1.0, 1.0)
    fprs = [p[0] for p in roc.points]
    tprs = [p[1] for p in roc.points]
    assert fprs == sorted(fprs)
    assert tprs == sorted(tprs)
    assert 0.0 <= roc.auc <= 1.0


def test_auc_equals_pair_counting_exactly():
    rng = np.random.default_rng(6)
    for _ in range(60):
        n = int(rng.integers(2, 200))
        scores = np.round(rng.random(n), 2)  # many ties
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        got = roc_and_auc(scores, labels).auc
        want = mann_whitney_auc(scores.tolist(), labels.tolist())
        assert got == want  # bit-exact


def test_auc_invariant_under_monotone_transform():
    rng = np.random.default_rng(7)
    scores = rng.random(60)
    labels = rng.integers(0, 2, 60)
    labels[:2] = [0, 1]
    base = roc_and_auc(scores, labels).auc
    assert roc_and_auc(np.exp(3 * scores), labels).auc == base
    assert roc_and_auc(scores ** 3 + 10, labels).auc == base


def test_roc_single_class_rejected():
    with pytest.raises(ValueError):
        roc_and_auc([0.1, 0.9], [1, 1])


def test_auc_near_half_under_label_permutation():
    # permuting labels destroys any signal: held-out AUC lands at the null
    rng = np.random.default_rng(9)
    X = rng.normal(size=(400, 3))
    logits = X @ np.array([1.0, -1.5, 0.5])
    y = (1 / (1 + np.exp(-logits)) > rng.random(400)).astype(int)
    permuted = rng.permutation(y)
    rows = [FeatureVector(values=tuple(r)) for r in X]
    model = fit(rows[:200], permuted[:200])
    scores = predict_proba_batch(model, rows[200:])
    auc = roc_and_auc(scores, permuted[200:]).auc
    assert 0.4 <= auc <= 0.6


# ---------------------------------------------------------------------------
# threshold metrics


def test_threshold_metrics_perfect():
    m = threshold_metrics([0.1, 0.2, 0.9, 0.8], [0, 0, 1, 1])
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)


def test_threshold_metrics_all_positive():
    m = threshold_metrics([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
    assert m.precision == 0.5
    assert m.recall == 1.0
    assert m.f1 == pytest.approx(2 / 3)


def test_threshold_metrics_confusion_counts():
    # TP=3 FP=1 FN=1 TN=5
    scores = [0.9, 0.8, 0.7, 0.6] + [0.1, 0.2, 0.3, 0.4, 0.45, 0.2]
    labels = [1, 1, 1, 0] + [1, 0, 0, 0, 0, 0]
    m = threshold_metrics(scores, labels)
    assert m.accuracy == pytest.approx(0.8)
    assert m.precision == pytest.approx(0.75)
    assert m.recall == pytest.approx(0.75)
    assert m.f1 == pytest.approx(0.75)


def test_threshold_metrics_no_predicted_positive():
    m = threshold_metrics([0.1, 0.2, 0.3], [0, 1, 0], threshold=0.5)
    assert m.precision is None
    assert m.f1 == 0.0


# ---------------------------------------------------------------------------
# persistence


def test_model_json_roundtrip(tmp_path):
    model = fit(rows_from([-1.0, -0.5, 0.5, 1.0]), [0, 0, 1, 1],
                feature_names=("distance_mm",), train_patient_ids=("p1", "p2"),
                meta={"structure": "vessel", "choice": 2})
    path = tmp_path / "model.json"
    save_model(str(path), model)
    back = load_model(str(path))
    assert back == model
    assert model_from_dict(model_to_dict(model)) == model

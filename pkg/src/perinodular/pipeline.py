"""Batch pipeline stages: ingest annotations, quantify structure context,
run the statistical battery, train per-structure classifiers, and evaluate
them at patient level. Each stage reads and writes plain CSV/JSON files in
the run's output directory and is deterministic given identical inputs.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import annotations as ann
from . import context as ctx
from . import model as mdl
from . import stats
from .config import RunConfig, echo_config
from .grid import Mask, make_voi, resample_isometric
from .mhd import read_image, write_image
from .morphology import edt, extract_branches, skeletonize, write_branch_table


class InputError(Exception):
    """Unreadable or missing inputs (CLI exit code 2)."""


class ValidationError(Exception):
    """Inconsistent inputs, e.g. train/test patient overlap (CLI exit code 3)."""


STRUCTURE_ORDER = [ctx.StructureClass.PLEURA, ctx.StructureClass.AIRWAY,
                   ctx.StructureClass.VESSEL, ctx.StructureClass.ARTERY,
                   ctx.StructureClass.VEIN]

FEATURE_COLUMNS = ["nodule_id", "patient_id", "class", "distance_mm",
                   "count_c1", "count_c2", "nvol_c1_pct", "nvol_c2_pct",
                   "n_i", "n_ii", "n_iii"]


def _require_dir(path: str, what: str) -> str:
    if not path:
        raise InputError(f"{what} not configured")
    if not os.path.isdir(path):
        raise InputError(f"{what} {path!r} is not a directory")
    return path


def _require_file(path: str, what: str) -> str:
    if not path:
        raise InputError(f"{what} not configured")
    if not os.path.isfile(path):
        raise InputError(f"{what} {path!r} does not exist")
    return path


def _out_dir(cfg: RunConfig) -> str:
    if not cfg.output_dir:
        raise InputError("output_dir not configured")
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def _mask_path(cfg: RunConfig, structure: ctx.StructureClass, patient_id: str) -> str | None:
    path = os.path.join(cfg.masks_dir, structure.value, f"{patient_id}.mhd")
    return path if os.path.isfile(path) else None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


# ---------------------------------------------------------------------------
# ingest


def run_ingest(cfg: RunConfig) -> dict:
    """Parse annotation XMLs, fuse reads into nodules, write manifest + masks."""
    annotations_dir = _require_dir(cfg.annotations_dir, "annotations_dir")
    _require_dir(cfg.masks_dir, "masks_dir")
    out = _out_dir(cfg)
    xml_files = sorted(f for f in os.listdir(annotations_dir) if f.endswith(".xml"))
    if not xml_files:
        raise InputError(f"no annotation XML files in {annotations_dir!r}")

    nodules_dir = os.path.join(out, "nodules")
    os.makedirs(nodules_dir, exist_ok=True)

    records = []
    excluded_marks = 0
    for name in xml_files:
        patient_id = name[:-4]
        grid = _reference_grid(cfg, patient_id)
        try:
            with open(os.path.join(annotations_dir, name)) as fh:
                sessions = ann.parse_annotation_xml(fh.read())
        except (OSError, ann.AnnotationError) as exc:
            raise InputError(f"cannot ingest {name}: {exc}") from exc
        reads = []
        for session in sessions:
            for mark in session.marks:
                if mark.excluded:
                    excluded_marks += 1
                    continue
                reads.append(ann.make_read(mark, grid))
        for k, cluster in enumerate(ann.group_reads(reads)):
            nodule_id = f"{patient_id}-n{k + 1:02d}"
            rec = ann.fuse_cluster(cluster, grid, nodule_id=nodule_id, patient_id=patient_id)
            write_image(os.path.join(nodules_dir, f"{nodule_id}.mhd"), rec.fused_mask)
            records.append(rec)

    if not records:
        raise InputError("no eligible nodules found in the annotation files")
    records.sort(key=lambda r: r.nodule_id)
    ann.write_manifest(os.path.join(out, "manifest.csv"),
                       [ann.ManifestRow.from_record(r) for r in records])
    echo_config(cfg, os.path.join(out, "run_config.txt"))

    by_label = {label.value: 0 for label in ann.ProxyLabel}
    for rec in records:
        by_label[rec.proxy_label.value] += 1
    summary = {
        "patients": len(xml_files),
        "nodules": len(records),
        "excluded_marks": excluded_marks,
        "by_label": by_label,
        "manifest": os.path.join(out, "manifest.csv"),
    }
    with open(os.path.join(out, "ingest_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def _reference_grid(cfg: RunConfig, patient_id: str) -> Mask:
    for structure in STRUCTURE_ORDER:
        path = _mask_path(cfg, structure, patient_id)
        if path:
            return read_image(path)
    raise InputError(f"no structure mask found for patient {patient_id!r} under {cfg.masks_dir!r}")


# ---------------------------------------------------------------------------
# quantify


def run_quantify(cfg: RunConfig) -> dict:
    """Compute the per-nodule feature table for every structure class."""
    out = _out_dir(cfg)
    _require_dir(cfg.masks_dir, "masks_dir")
    manifest = ann.read_manifest(_require_file(os.path.join(out, "manifest.csv"), "manifest"))
    rule = ctx.FilterRule(d_near_mm=cfg.attach_d_near_mm, d_far_mm=cfg.attach_d_far_mm,
                          max_angle_deg=cfg.attach_max_angle_deg)

    by_patient: dict[str, list[ann.ManifestRow]] = {}
    for row in manifest:
        by_patient.setdefault(row.patient_id, []).append(row)

    skeleton_dir = os.path.join(out, "skeletons")
    os.makedirs(skeleton_dir, exist_ok=True)

    def quantify_patient(patient_id: str) -> list[ctx.StructureFeatures]:
        structures: dict[ctx.StructureClass, Mask | None] = {}
        graphs: dict[ctx.StructureClass, object] = {}
        for structure in STRUCTURE_ORDER:
            path = _mask_path(cfg, structure, patient_id)
            if path is None:
                structures[structure] = None
                continue
            mask = resample_isometric(read_image(path), cfg.resample_spacing_mm)
            structures[structure] = mask
            if structure.has_branches and mask.data.any():
                skeleton = skeletonize(mask)
                graphs[structure] = extract_branches(skeleton)
                stem = os.path.join(skeleton_dir, f"{patient_id}_{structure.value}")
                write_image(stem + ".mhd", skeleton)
                write_branch_table(stem + "_branches.csv", graphs[structure])
        grids = [m for m in structures.values() if m is not None]
        for other in grids[1:]:
            if not grids[0].same_grid(other):
                raise ValidationError(f"structure masks of patient {patient_id!r} "
                                      "disagree on grid after resampling")
        rows = []
        for nrow in sorted(by_patient[patient_id], key=lambda r: r.nodule_id):
            nodule_path = os.path.join(out, "nodules", f"{nrow.nodule_id}.mhd")
            nodule = resample_isometric(read_image(_require_file(nodule_path, "nodule mask")),
                                        cfg.resample_spacing_mm)
            if grids and not nodule.same_grid(grids[0]):
                raise ValidationError(
                    f"nodule {nrow.nodule_id} grid disagrees with the structure masks")
            nodule_edt = edt(nodule)
            voi = make_voi(nrow.centroid_mm, nrow.eq_diameter_mm,
                           min_radius=cfg.voi_min_radius_mm)
            for structure in STRUCTURE_ORDER:
                rows.append(ctx.quantify_structure(
                    nodule_id=nrow.nodule_id, structure_class=structure,
                    nodule=nodule, structure=structures[structure],
                    branches=graphs.get(structure), voi=voi, rule=rule,
                    nodule_centroid=nrow.centroid_mm, nodule_surface_edt=nodule_edt))
        return rows

    patients = sorted(by_patient)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            per_patient = list(pool.map(quantify_patient, patients))
    else:
        per_patient = [quantify_patient(p) for p in patients]

    patient_of = {row.nodule_id: row.patient_id for row in manifest}
    features_path = os.path.join(out, "features.csv")
    with open(features_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FEATURE_COLUMNS)
        for rows in per_patient:
            for f in rows:
                w.writerow([f.nodule_id, patient_of[f.nodule_id], f.structure.value,
                            _fmt(f.distance_mm), _fmt(f.count_c1), _fmt(f.count_c2),
                            _fmt(f.nvol_c1_pct), _fmt(f.nvol_c2_pct),
                            _fmt(f.n_i), _fmt(f.n_ii), _fmt(f.n_iii)])
    echo_config(cfg, os.path.join(out, "run_config.txt"))
    return {"patients": len(patients), "nodules": len(manifest),
            "rows": sum(len(r) for r in per_patient), "features": features_path}


def read_features(path: str) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "nodule_id": rec["nodule_id"],
                "patient_id": rec["patient_id"],
                "class": rec["class"],
                "distance_mm": float(rec["distance_mm"]) if rec["distance_mm"] else None,
                "count_c1": int(rec["count_c1"]) if rec["count_c1"] else None,
                "count_c2": int(rec["count_c2"]) if rec["count_c2"] else None,
                "nvol_c1_pct": float(rec["nvol_c1_pct"]) if rec["nvol_c1_pct"] else None,
                "nvol_c2_pct": float(rec["nvol_c2_pct"]) if rec["nvol_c2_pct"] else None,
            })
    return rows


# ---------------------------------------------------------------------------
# analyze


def _feature_value(frow: dict, feature: str, choice: int | None):
    if feature == "distance":
        return frow["distance_mm"]
    return frow[f"count_c{choice}"] if feature == "count" else frow[f"nvol_c{choice}_pct"]


def _contingency(values, flags, cutoff: float):
    """Cells for rows (<= cutoff / > cutoff) x columns (flag False / True)."""
    t11 = sum(1 for v, f in zip(values, flags) if v <= cutoff and not f)
    t12 = sum(1 for v, f in zip(values, flags) if v <= cutoff and f)
    t21 = sum(1 for v, f in zip(values, flags) if v > cutoff and not f)
    t22 = sum(1 for v, f in zip(values, flags) if v > cutoff and f)
    return stats.ContingencyTable(t11, t12, t21, t22)


def _table_block(values, flags, cutoff: float) -> dict:
    table = _contingency(values, flags, cutoff)
    block = {"cells": [list(r) for r in table.rows()], "cutoff": cutoff}
    try:
        orv = stats.odds_ratio(table)
        block["odds_ratio"] = None if math.isinf(orv) else orv
        block["odds_ratio_infinite"] = math.isinf(orv)
    except stats.DegenerateTableError:
        block["odds_ratio"] = None
        block["odds_ratio_infinite"] = False
    try:
        chi = stats.chi_square_2x2(table)
        block["chi_square"] = chi.statistic
        block["p_value"] = chi.p_value
    except stats.DegenerateTableError:
        block["chi_square"] = None
        block["p_value"] = None
    return block


def run_analyze(cfg: RunConfig) -> dict:
    """Group comparisons, contingency tables and correlations; writes analysis.json."""
    out = _out_dir(cfg)
    manifest = ann.read_manifest(_require_file(os.path.join(out, "manifest.csv"), "manifest"))
    features = read_features(_require_file(os.path.join(out, "features.csv"), "feature table"))
    # input row order must not leak into the report
    manifest.sort(key=lambda m: m.nodule_id)
    features.sort(key=lambda f: (f["nodule_id"], f["class"]))

    cohort = {m.nodule_id: m for m in manifest if m.proxy_label is not ann.ProxyLabel.UNCERTAIN}
    labels = {nid: m.proxy_label is ann.ProxyLabel.MALIGNANT for nid, m in cohort.items()}
    if len(set(labels.values())) < 2:
        raise ValidationError("statistical cohort has a single proxy label class")
    attributes = {
        "malignancy": labels,
        "eq_diameter": {nid: m.eq_diameter_mm >= cfg.eqd_cutoff_mm for nid, m in cohort.items()},
        "texture": {nid: m.mean_texture >= cfg.texture_solid_min_score
                    for nid, m in cohort.items() if m.mean_texture is not None},
    }
    by_class: dict[str, list[dict]] = {}
    for frow in features:
        if frow["nodule_id"] in cohort:
            by_class.setdefault(frow["class"], []).append(frow)

    feature_keys = []
    for structure in STRUCTURE_ORDER:
        if structure is ctx.StructureClass.PLEURA:
            feature_keys.append((structure.value, "distance", None))
            continue
        feature_keys.append((structure.value, "distance", None))
        for choice in (1, 2):
            feature_keys.append((structure.value, "count", choice))
            feature_keys.append((structure.value, "nvol", choice))

    feature_blocks = []
    for cls, feature, choice in feature_keys:
        rows = by_class.get(cls, [])
        pairs = [(frow["nodule_id"], _feature_value(frow, feature, choice)) for frow in rows]
        pairs = [(nid, v) for nid, v in pairs if v is not None]
        if not pairs:
            continue
        block = {"class": cls, "feature": feature, "choice": choice,
                 "n": len(pairs), "groups": {}, "t_test": None, "tables": {}}
        benign = [v for nid, v in pairs if not labels[nid]]
        malignant = [v for nid, v in pairs if labels[nid]]
        for name, vals in (("benign", benign), ("malignant", malignant)):
            if vals:
                mean, sd = stats.group_summary(vals)
                block["groups"][name] = {"n": len(vals), "mean": mean, "sd": sd}
        if len(benign) >= 2 and len(malignant) >= 2:
            t = stats.t_test_two_sample(benign, malignant)
            block["t_test"] = {"statistic": t.statistic, "p_value": t.p_value, "df": t.df}
        if feature == "distance":
            cutoff = cfg.cutoff_distance_mm
        elif feature == "count":
            cutoff = cfg.count_cutoff(cls, choice)
        else:
            cutoff = cfg.nvol_cutoff(cls)
        for attr, flag_map in attributes.items():
            flagged = [(v, flag_map[nid]) for nid, v in pairs if nid in flag_map]
            if flagged:
                block["tables"][attr] = _table_block([v for v, _ in flagged],
                                                     [f for _, f in flagged], cutoff)
        feature_blocks.append(block)

    correlations = []
    eqd = {nid: m.eq_diameter_mm for nid, m in cohort.items()}
    group_filters = {"benign": lambda nid: not labels[nid],
                     "malignant": lambda nid: labels[nid],
                     "all": lambda nid: True}
    for structure in STRUCTURE_ORDER:
        cls = structure.value
        rows = by_class.get(cls, [])
        pair_specs = [("distance", "eq_diameter", None)]
        if structure.has_branches:
            for choice in (1, 2):
                pair_specs += [("count", "eq_diameter", choice),
                               ("nvol", "eq_diameter", choice),
                               ("count", "nvol", choice)]
        for fa, fb, choice in pair_specs:
            for gname, keep in group_filters.items():
                xs, ys = [], []
                for frow in rows:
                    nid = frow["nodule_id"]
                    if not keep(nid):
                        continue
                    va = _feature_value(frow, fa, choice)
                    vb = eqd[nid] if fb == "eq_diameter" else _feature_value(frow, fb, choice)
                    if va is not None and vb is not None:
                        xs.append(va)
                        ys.append(vb)
                entry = {"class": cls, "x": fa, "y": fb, "choice": choice,
                         "group": gname, "n": len(xs), "r": None, "p_value": None}
                if len(xs) >= 3:
                    try:
                        res = stats.pearson_r(xs, ys)
                        entry["r"], entry["p_value"] = res.statistic, res.p_value
                    except ValueError:
                        pass  # constant inputs stay unreported
                correlations.append(entry)

    report = {
        "cohort": {
            "nodules": len(manifest),
            "in_analysis": len(cohort),
            "benign": sum(1 for v in labels.values() if not v),
            "malignant": sum(1 for v in labels.values() if v),
            "uncertain_excluded": len(manifest) - len(cohort),
        },
        "features": feature_blocks,
        "correlations": correlations,
    }
    with open(os.path.join(out, "analysis.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    echo_config(cfg, os.path.join(out, "run_config.txt"))
    return {"features": len(feature_blocks), "correlations": len(correlations),
            "report": os.path.join(out, "analysis.json"), "cohort": report["cohort"]}


# ---------------------------------------------------------------------------
# train / evaluate


def _model_specs():
    specs = [("pleura", ctx.StructureClass.PLEURA, None)]
    for structure in STRUCTURE_ORDER:
        if structure.has_branches:
            for choice in (1, 2):
                specs.append((f"{structure.value}_choice{choice}", structure, choice))
    return specs


def _feature_rows_for(structure: ctx.StructureClass, choice: int | None,
                      features: list[dict], nodule_ids) -> list[mdl.FeatureVector]:
    by_nodule = {f["nodule_id"]: f for f in features if f["class"] == structure.value}
    rows = []
    for nid in nodule_ids:
        frow = by_nodule.get(nid)
        if frow is None:
            raise InputError(f"feature table has no {structure.value} row for nodule {nid}")
        if structure is ctx.StructureClass.PLEURA:
            values = (frow["distance_mm"],)
        else:
            values = (frow["distance_mm"], frow[f"count_c{choice}"],
                      frow[f"nvol_c{choice}_pct"])
        rows.append(mdl.FeatureVector(values=values, nodule_id=nid,
                                      patient_id=frow["patient_id"]))
    return rows


def run_train(cfg: RunConfig) -> dict:
    """Train one classifier per structure feature set on proxy-labeled nodules."""
    out = _out_dir(cfg)
    manifest = ann.read_manifest(_require_file(os.path.join(out, "manifest.csv"), "manifest"))
    features = read_features(_require_file(os.path.join(out, "features.csv"), "feature table"))

    cohort = [m for m in manifest if m.proxy_label is not ann.ProxyLabel.UNCERTAIN]
    labels = [1 if m.proxy_label is ann.ProxyLabel.MALIGNANT else 0 for m in cohort]
    if sum(labels) < 2 or len(labels) - sum(labels) < 2:
        raise ValidationError("training needs at least 2 benign and 2 malignant nodules")
    nodule_ids = [m.nodule_id for m in cohort]
    patients = tuple(sorted({m.patient_id for m in cohort}))

    models_dir = os.path.join(out, "models")
    os.makedirs(models_dir, exist_ok=True)
    trained = {}
    for name, structure, choice in _model_specs():
        rows = _feature_rows_for(structure, choice, features, nodule_ids)
        if structure is ctx.StructureClass.PLEURA:
            feature_names = ("distance_mm",)
        else:
            feature_names = ("distance_mm", f"count_c{choice}", f"nvol_c{choice}_pct")
        try:
            model = mdl.fit(rows, labels, l2=cfg.l2, balanced=cfg.balanced,
                            feature_names=feature_names, train_patient_ids=patients,
                            meta={"structure": structure.value, "choice": choice})
        except ValueError as exc:
            raise ValidationError(f"cannot train {name}: {exc}") from exc
        path = os.path.join(models_dir, f"{name}.json")
        mdl.save_model(path, model)
        trained[name] = path
    echo_config(cfg, os.path.join(out, "run_config.txt"))
    return {"models": trained, "n_train": len(nodule_ids),
            "benign": len(labels) - sum(labels), "malignant": sum(labels)}


def run_evaluate(cfg: RunConfig) -> dict:
    """Patient-level evaluation of trained models on a diagnosis-labeled cohort."""
    out = _out_dir(cfg)
    manifest = ann.read_manifest(_require_file(os.path.join(out, "manifest.csv"), "manifest"))
    features = read_features(_require_file(os.path.join(out, "features.csv"), "feature table"))
    diagnoses = ann.read_diagnoses(_require_file(cfg.diagnosis_csv, "diagnosis_csv"))
    models_dir = os.path.join(_require_dir(cfg.train_dir, "train_dir"), "models")
    if not os.path.isdir(models_dir):
        raise InputError(f"{models_dir!r} does not exist; run the training stage first")

    test_patients = sorted({m.patient_id for m in manifest})
    missing = [p for p in test_patients if p not in diagnoses]
    if missing:
        raise InputError(f"patients without diagnosis rows: {missing}")
    patient_labels = {p: 1 if diagnoses[p].is_malignant else 0 for p in test_patients}
    if len(set(patient_labels.values())) < 2:
        raise ValidationError("test cohort has a single patient-level class")

    nodule_ids = [m.nodule_id for m in manifest]
    patient_of = {m.nodule_id: m.patient_id for m in manifest}

    results = []
    for name, structure, choice in _model_specs():
        path = os.path.join(models_dir, f"{name}.json")
        if not os.path.isfile(path):
            raise InputError(f"missing model file {path!r}")
        model = mdl.load_model(path)
        overlap = set(model.train_patient_ids) & set(test_patients)
        if overlap:
            raise ValidationError(
                f"train/test patient overlap for model {name}: {sorted(overlap)}")
        rows = _feature_rows_for(structure, choice, features, nodule_ids)
        probs = mdl.predict_proba_batch(model, rows)
        per_patient: dict[str, list[float]] = {}
        for nid, prob in zip(nodule_ids, probs):
            per_patient.setdefault(patient_of[nid], []).append(float(prob))
        agg = mdl.patient_aggregate(per_patient)
        scores = [agg[p] for p in test_patients]
        y = [patient_labels[p] for p in test_patients]
        roc = mdl.roc_and_auc(scores, y)
        metrics = mdl.threshold_metrics(scores, y, threshold=cfg.threshold)
        roc_path = os.path.join(out, f"roc_{name}.csv")
        with open(roc_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["fpr", "tpr"])
            for fpr, tpr in roc.points:
                w.writerow([f"{fpr:.6g}", f"{tpr:.6g}"])
        results.append({
            "model": name, "structure": structure.value, "choice": choice,
            "accuracy": metrics.accuracy, "precision": metrics.precision,
            "recall": metrics.recall, "f1": metrics.f1, "auc": roc.auc,
            "n_patients": len(test_patients), "roc_csv": roc_path,
        })

    report = {
        "threshold": cfg.threshold,
        "n_patients": len(test_patients),
        "benign_patients": sum(1 for v in patient_labels.values() if v == 0),
        "malignant_patients": sum(1 for v in patient_labels.values() if v == 1),
        "models": results,
    }
    with open(os.path.join(out, "evaluation.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    echo_config(cfg, os.path.join(out, "run_config.txt"))
    return report


# ---------------------------------------------------------------------------
# report


def run_report(cfg: RunConfig) -> dict:
    """Render a human-readable run summary from the JSON reports."""
    out = _out_dir(cfg)
    sections = []
    produced = {}
    analysis_path = os.path.join(out, "analysis.json")
    if os.path.isfile(analysis_path):
        with open(analysis_path) as fh:
            analysis = json.load(fh)
        produced["analysis"] = analysis_path
        c = analysis["cohort"]
        lines = ["# Analysis", "",
                 f"Cohort: {c['in_analysis']} nodules "
                 f"({c['benign']} benign, {c['malignant']} malignant, "
                 f"{c['uncertain_excluded']} uncertain excluded)", "",
                 "| class | feature | choice | OR (malignancy) | chi2 | p |",
                 "|---|---|---|---|---|---|"]
        for block in analysis["features"]:
            table = block["tables"].get("malignancy")
            if not table:
                continue
            orv = ("inf" if table["odds_ratio_infinite"]
                   else "" if table["odds_ratio"] is None else f"{table['odds_ratio']:.2f}")
            chi = "" if table["chi_square"] is None else f"{table['chi_square']:.2f}"
            p = "" if table["p_value"] is None else f"{table['p_value']:.3g}"
            lines.append(f"| {block['class']} | {block['feature']} | "
                         f"{block['choice'] or ''} | {orv} | {chi} | {p} |")
        sections.append("\n".join(lines))
    evaluation_path = os.path.join(out, "evaluation.json")
    if os.path.isfile(evaluation_path):
        with open(evaluation_path) as fh:
            evaluation = json.load(fh)
        produced["evaluation"] = evaluation_path
        lines = ["# Patient-level evaluation", "",
                 f"{evaluation['n_patients']} patients "
                 f"({evaluation['benign_patients']} benign, "
                 f"{evaluation['malignant_patients']} malignant), "
                 f"threshold {evaluation['threshold']}", "",
                 "| model | accuracy | precision | recall | F1 | AUC |",
                 "|---|---|---|---|---|---|"]
        for row in evaluation["models"]:
            prec = "" if row["precision"] is None else f"{row['precision']:.4f}"
            lines.append(f"| {row['model']} | {row['accuracy']:.4f} | {prec} | "
                         f"{row['recall']:.4f} | {row['f1']:.4f} | {row['auc']:.4f} |")
        sections.append("\n".join(lines))
    if not sections:
        raise InputError(f"nothing to report: no analysis.json or evaluation.json in {out!r}")
    text = "\n\n".join(sections) + "\n"
    report_path = os.path.join(out, "report.md")
    with open(report_path, "w") as fh:
        fh.write(text)
    produced["report"] = report_path
    return {"report": report_path, "sections": list(produced)}

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from synth import PatientSpec, build_cohort, tube_layout  # noqa: E402

SHAPE = (44, 44, 32)
NODULE_B = (10, 34, 16)   # secondary nodule for multi-instance patients


def _train_patients():
    # nodule positions and radii vary so no feature is constant over the cohort
    specs = []
    benign = [((20, 22, 16), 4.0, (1, 2)), ((24, 21, 16), 4.5, (2, 2)),
              ((21, 25, 15), 4.2, (1, 1)), ((23, 23, 17), 4.8, (2, 3))]
    for i, (center, radius, scores) in enumerate(benign):
        specs.append(PatientSpec(
            f"t{i + 1:02d}", [(center, radius, scores, 3)],
            tubes=tube_layout(center, rich=False, jitter=0.5 * i, shape=SHAPE)))
    malignant = [((20, 24, 17), 4.4, (4, 5)), ((25, 20, 16), 4.9, (5, 5)),
                 ((22, 26, 15), 4.1, (4, 4)), ((26, 23, 17), 4.6, (3, 5))]
    for i, (center, radius, scores) in enumerate(malignant):
        specs.append(PatientSpec(
            f"t{i + 5:02d}", [(center, radius, scores, 5)],
            tubes=tube_layout(center, rich=True, jitter=0.5 * i, shape=SHAPE)))
    # one patient with a single uncertain nodule, excluded from the cohort
    specs.append(PatientSpec(
        "t09", [((22, 22, 16), 4.0, (3,), 4)],
        tubes=tube_layout((22, 22, 16), rich=False, jitter=2.0, shape=SHAPE)))
    return specs


def _test_patients():
    return [
        PatientSpec("e01", [((21, 23, 16), 4.0, (2,), 3)],
                    tubes=tube_layout((21, 23, 16), rich=False, jitter=0.25, shape=SHAPE),
                    diagnosis=1),
        PatientSpec("e02", [((24, 22, 15), 4.5, (2, 1), 3)],
                    tubes=tube_layout((24, 22, 15), rich=False, jitter=1.25, shape=SHAPE),
                    diagnosis=1),
        PatientSpec("e03", [((23, 24, 17), 4.5, (4,), 5), (NODULE_B, 3.5, (2,), 4)],
                    tubes=tube_layout((23, 24, 17), rich=True, jitter=0.75, shape=SHAPE),
                    diagnosis=2),
        PatientSpec("e04", [((20, 21, 16), 5.0, (5, 4), 5)],
                    tubes=tube_layout((20, 21, 16), rich=True, jitter=1.75, shape=SHAPE),
                    diagnosis=3),
    ]


@pytest.fixture(scope="session")
def train_cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("train_cohort")
    paths = build_cohort(str(root), _train_patients(), shape=SHAPE)
    paths["root"] = str(root)
    return paths


@pytest.fixture(scope="session")
def test_cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("test_cohort")
    paths = build_cohort(str(root), _test_patients(), shape=SHAPE)
    paths["root"] = str(root)
    return paths


@pytest.fixture(scope="session")
def train_run(train_cohort, tmp_path_factory):
    """Ingested + quantified + analyzed + trained run on the training cohort."""
    from perinodular.config import RunConfig
    from perinodular.pipeline import run_analyze, run_ingest, run_quantify, run_train

    out = str(tmp_path_factory.mktemp("train_run"))
    cfg = RunConfig(annotations_dir=train_cohort["annotations_dir"],
                    masks_dir=train_cohort["masks_dir"], output_dir=out)
    ingest_summary = run_ingest(cfg)
    quantify_summary = run_quantify(cfg)
    analyze_summary = run_analyze(cfg)
    train_summary = run_train(cfg)
    return {"cfg": cfg, "out": out, "ingest": ingest_summary,
            "quantify": quantify_summary, "analyze": analyze_summary,
            "train": train_summary}


@pytest.fixture(scope="session")
def test_run(test_cohort, tmp_path_factory):
    """Ingested + quantified run on the diagnosis-labeled cohort."""
    from perinodular.config import RunConfig
    from perinodular.pipeline import run_ingest, run_quantify

    out = str(tmp_path_factory.mktemp("test_run"))
    cfg = RunConfig(annotations_dir=test_cohort["annotations_dir"],
                    masks_dir=test_cohort["masks_dir"],
                    diagnosis_csv=test_cohort["diagnosis_csv"], output_dir=out)
    run_ingest(cfg)
    run_quantify(cfg)
    return {"cfg": cfg, "out": out}

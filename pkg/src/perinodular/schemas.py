"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


# --- statistics ------------------------------------------------------------


class ContingencyRequest(BaseModel):
    cells: list[list[int]] = Field(description="2x2 counts, rows = feature <=/> cutoff")
    haldane: bool = False


class ContingencyResponse(BaseModel):
    cells: list[list[int]]
    odds_ratio: float | None
    odds_ratio_infinite: bool
    chi_square: float
    p_value: float
    df: float


class TTestRequest(BaseModel):
    a: list[float]
    b: list[float]
    variant: str = "pooled"


class PearsonRequest(BaseModel):
    x: list[float]
    y: list[float]


class TestResultResponse(BaseModel):
    statistic: float
    p_value: float
    df: float | None = None


class DichotomizeRequest(BaseModel):
    values: list[float]
    cutoff: float


class DichotomizeResponse(BaseModel):
    n_low: int
    n_high: int


# --- classification --------------------------------------------------------


class FeatureRow(BaseModel):
    values: list[float | None]
    nodule_id: str = ""
    patient_id: str = ""


class FitRequest(BaseModel):
    rows: list[FeatureRow]
    labels: list[int]
    l2: float = 1e-4
    balanced: bool = False
    feature_names: list[str] = []


class ModelPayload(BaseModel):
    weights: list[float]
    bias: float
    feature_means: list[float]
    feature_sds: list[float]
    impute_values: list[float]
    feature_names: list[str] = []
    train_patient_ids: list[str] = []
    meta: dict = {}


class FitResponse(BaseModel):
    model: ModelPayload


class PredictRequest(BaseModel):
    model: ModelPayload
    rows: list[FeatureRow]


class PredictResponse(BaseModel):
    probabilities: list[float]


class RocRequest(BaseModel):
    scores: list[float]
    labels: list[int]


class RocResponse(BaseModel):
    points: list[tuple[float, float]]
    auc: float


class AggregateRequest(BaseModel):
    probabilities: dict[str, list[float]] = Field(
        description="nodule probabilities keyed by patient id")


class AggregateResponse(BaseModel):
    patients: dict[str, float]


class ThresholdMetricsRequest(BaseModel):
    scores: list[float]
    labels: list[int]
    threshold: float = 0.5


class ThresholdMetricsResponse(BaseModel):
    accuracy: float
    precision: float | None
    recall: float
    f1: float


# --- pipeline ---------------------------------------------------------------


class PipelineRequest(BaseModel):
    config_file: str | None = None
    overrides: dict[str, str | float | int | bool] = {}


class PipelineResponse(BaseModel):
    stage: str
    summary: dict

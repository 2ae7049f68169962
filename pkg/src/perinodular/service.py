"""FastAPI service exposing the statistics, classification and pipeline
stages. The CLI calls the same handler functions in process; a deployed
instance serves them over HTTP for shared data directories.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException

from . import __version__, model as mdl, pipeline, stats
from .config import load_config
from .schemas import (
    AggregateRequest,
    AggregateResponse,
    ContingencyRequest,
    ContingencyResponse,
    DichotomizeRequest,
    DichotomizeResponse,
    FitRequest,
    FitResponse,
    HealthResponse,
    ModelPayload,
    PearsonRequest,
    PipelineRequest,
    PipelineResponse,
    PredictRequest,
    PredictResponse,
    RocRequest,
    RocResponse,
    TestResultResponse,
    ThresholdMetricsRequest,
    ThresholdMetricsResponse,
    TTestRequest,
)

PIPELINE_STAGES = {
    "ingest": pipeline.run_ingest,
    "quantify": pipeline.run_quantify,
    "analyze": pipeline.run_analyze,
    "train": pipeline.run_train,
    "evaluate": pipeline.run_evaluate,
    "report": pipeline.run_report,
}


# --- handlers (shared by HTTP endpoints and the in-process CLI client) ------


def handle_contingency(req: ContingencyRequest) -> ContingencyResponse:
    table = stats.ContingencyTable.from_rows(req.cells)
    orv = stats.odds_ratio(table, haldane=req.haldane)
    chi = stats.chi_square_2x2(table)
    return ContingencyResponse(
        cells=[list(r) for r in table.rows()],
        odds_ratio=None if math.isinf(orv) else orv,
        odds_ratio_infinite=math.isinf(orv),
        chi_square=chi.statistic, p_value=chi.p_value, df=chi.df,
    )


def handle_ttest(req: TTestRequest) -> TestResultResponse:
    res = stats.t_test_two_sample(req.a, req.b, variant=req.variant)
    return TestResultResponse(statistic=res.statistic, p_value=res.p_value, df=res.df)


def handle_pearson(req: PearsonRequest) -> TestResultResponse:
    res = stats.pearson_r(req.x, req.y)
    return TestResultResponse(statistic=res.statistic, p_value=res.p_value, df=res.df)


def handle_dichotomize(req: DichotomizeRequest) -> DichotomizeResponse:
    n_low, n_high = stats.dichotomize(req.values, req.cutoff)
    return DichotomizeResponse(n_low=n_low, n_high=n_high)


def handle_fit(req: FitRequest) -> FitResponse:
    rows = [mdl.FeatureVector(values=tuple(r.values), nodule_id=r.nodule_id,
                              patient_id=r.patient_id) for r in req.rows]
    model = mdl.fit(rows, req.labels, l2=req.l2, balanced=req.balanced,
                    feature_names=tuple(req.feature_names))
    return FitResponse(model=ModelPayload(**mdl.model_to_dict(model)))


def handle_predict(req: PredictRequest) -> PredictResponse:
    model = mdl.model_from_dict(req.model.model_dump())
    rows = [mdl.FeatureVector(values=tuple(r.values), nodule_id=r.nodule_id,
                              patient_id=r.patient_id) for r in req.rows]
    probs = mdl.predict_proba_batch(model, rows)
    return PredictResponse(probabilities=[float(p) for p in probs])


def handle_roc(req: RocRequest) -> RocResponse:
    roc = mdl.roc_and_auc(req.scores, req.labels)
    return RocResponse(points=list(roc.points), auc=roc.auc)


def handle_aggregate(req: AggregateRequest) -> AggregateResponse:
    return AggregateResponse(patients=mdl.patient_aggregate(req.probabilities))


def handle_threshold_metrics(req: ThresholdMetricsRequest) -> ThresholdMetricsResponse:
    m = mdl.threshold_metrics(req.scores, req.labels, threshold=req.threshold)
    return ThresholdMetricsResponse(accuracy=m.accuracy, precision=m.precision,
                                    recall=m.recall, f1=m.f1)


def handle_pipeline(stage: str, req: PipelineRequest) -> PipelineResponse:
    if stage not in PIPELINE_STAGES:
        raise pipeline.InputError(f"unknown pipeline stage {stage!r}")
    try:
        cfg = load_config(req.config_file, req.overrides)
    except (OSError, ValueError) as exc:
        raise pipeline.InputError(str(exc)) from exc
    summary = PIPELINE_STAGES[stage](cfg)
    return PipelineResponse(stage=stage, summary=summary)


# --- app --------------------------------------------------------------------


def create_app() -> FastAPI:
    app = FastAPI(title="perinodular", version=__version__)

    def guarded(fn, *args):
        try:
            return fn(*args)
        except pipeline.ValidationError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (pipeline.InputError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/stats/contingency", response_model=ContingencyResponse)
    def stats_contingency(req: ContingencyRequest):
        return guarded(handle_contingency, req)

    @app.post("/stats/t-test", response_model=TestResultResponse)
    def stats_ttest(req: TTestRequest):
        return guarded(handle_ttest, req)

    @app.post("/stats/pearson", response_model=TestResultResponse)
    def stats_pearson(req: PearsonRequest):
        return guarded(handle_pearson, req)

    @app.post("/stats/dichotomize", response_model=DichotomizeResponse)
    def stats_dichotomize(req: DichotomizeRequest):
        return guarded(handle_dichotomize, req)

    @app.post("/model/fit", response_model=FitResponse)
    def model_fit(req: FitRequest):
        return guarded(handle_fit, req)

    @app.post("/model/predict", response_model=PredictResponse)
    def model_predict(req: PredictRequest):
        return guarded(handle_predict, req)

    @app.post("/model/roc", response_model=RocResponse)
    def model_roc(req: RocRequest):
        return guarded(handle_roc, req)

    @app.post("/model/patient-aggregate", response_model=AggregateResponse)
    def model_aggregate(req: AggregateRequest):
        return guarded(handle_aggregate, req)

    @app.post("/model/threshold-metrics", response_model=ThresholdMetricsResponse)
    def model_threshold_metrics(req: ThresholdMetricsRequest):
        return guarded(handle_threshold_metrics, req)

    @app.post("/pipeline/{stage}", response_model=PipelineResponse)
    def pipeline_stage(stage: str, req: PipelineRequest):
        return guarded(handle_pipeline, stage, req)

    return app


app = create_app()

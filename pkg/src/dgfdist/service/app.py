"""FastAPI wrapper around the lab handlers."""

from fastapi import FastAPI, HTTPException

from .. import __version__
from . import api, schemas


def create_app() -> FastAPI:
    app = FastAPI(
        title="dgfdist",
        description="Distance-metric laboratory for directed grey-box fuzzing",
        version=__version__,
    )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/graph/validate", response_model=schemas.GraphValidateResponse)
    def graph_validate(req: schemas.GraphValidateRequest):
        return _call(api.validate_graph, req)

    @app.post("/distance", response_model=schemas.DistanceResponse)
    def distance(req: schemas.DistanceRequest):
        return _call(api.distance_map, req)

    @app.post("/fuzz", response_model=schemas.FuzzResponse)
    def fuzz(req: schemas.FuzzRequest):
        return _call(api.fuzz, req)

    @app.post("/experiment", response_model=schemas.ExperimentResponse)
    def experiment(req: schemas.ExperimentRequest):
        return _call(api.run_experiment, req)

    @app.post("/analyze", response_model=schemas.AnalyzeResponse)
    def analyze(req: schemas.AnalyzeRequest):
        return _call(api.analyze, req)

    return app


def _call(handler, req):
    try:
        return handler(req)
    except api.ApiError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None


app = create_app()

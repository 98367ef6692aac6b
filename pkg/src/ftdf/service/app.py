"""HTTP service wrapping the recognition pipeline.

Endpoints correspond one-to-one with the pipeline commands (synth, extract,
fuse, train, eval, sweep, predict). File paths in requests are resolved on
the server's filesystem; the bundled CLI talks to this app in-process by
default. Package errors surface as JSON payloads carrying the error family
(config/data/model) that clients map to exit codes.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, pipeline
from ..config import RunConfig
from ..errors import FtdfError
from . import schemas

_NON_CONFIG_FIELDS = {"model", "matrix", "trace", "samples"}


def _run_config(request):
    mapping = request.model_dump(exclude_none=True)
    for key in _NON_CONFIG_FIELDS:
        mapping.pop(key, None)
    return RunConfig.from_mapping(mapping)


def create_app():
    app = FastAPI(title="ftdf appliance recognition service", version=__version__)

    @app.exception_handler(FtdfError)
    async def _ftdf_error(request, exc):
        payload = schemas.ErrorPayload(
            error=type(exc).__name__, family=exc.family, detail=str(exc)
        )
        return JSONResponse(status_code=400, content=payload.model_dump())

    @app.exception_handler(FileNotFoundError)
    async def _not_found(request, exc):
        payload = schemas.ErrorPayload(error="FileNotFound", family="data", detail=str(exc))
        return JSONResponse(status_code=404, content=payload.model_dump())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest):
        mapping = req.model_dump(exclude_none=True)
        cfg = RunConfig.from_mapping(mapping)
        return schemas.SynthResponse(**pipeline.run_synth(cfg))

    @app.post("/extract", response_model=schemas.ExtractResponse)
    def extract(req: schemas.ExtractRequest):
        return schemas.ExtractResponse(**pipeline.run_extract(_run_config(req)))

    @app.post("/fuse", response_model=schemas.FuseResponse)
    def fuse(req: schemas.FuseRequest):
        return schemas.FuseResponse(**pipeline.run_fuse(_run_config(req)))

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        return schemas.TrainResponse(**pipeline.run_train(_run_config(req)))

    @app.post("/eval", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        result = pipeline.run_eval(_run_config(req), model_path=req.model, matrix_path=req.matrix)
        return schemas.EvalResponse(**result)

    @app.post("/sweep", response_model=schemas.SweepResponse)
    def sweep(req: schemas.SweepRequest):
        return schemas.SweepResponse(**pipeline.run_sweep(_run_config(req)))

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict(req: schemas.PredictRequest):
        result = pipeline.run_predict(
            req.model, trace_path=req.trace, samples=req.samples, fs=req.fs
        )
        return schemas.PredictResponse(**result)

    return app

"""FastAPI application wrapping the pipeline runners.

The service owns all computation; clients (including the bundled CLI) only
send paths and small parameters. Domain errors map to HTTP 400 with the
error class name so scripted callers can branch on it.
"""

from __future__ import annotations

import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..artifacts import MON_FILENAME, ModelArtifact, load_artifact
from ..errors import InvalidDims, MondetError
from ..normality import distance_heatmap, image_score
from ..pipeline import run_build, run_evaluate, run_score, run_synth
from ..synthgen import SynthConfig
from ..tensorio import FeatureTensor
from ..thresholding import THRESHOLD_NAMES, classify
from .schemas import (
    BuildRequest,
    BuildResponse,
    ErrorBody,
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    ScoreRequest,
    ScoreResponse,
    SynthRequest,
    SynthResponse,
    TensorScoreRequest,
    TensorScoreResponse,
)

_ERROR_RESPONSES = {400: {"model": ErrorBody}}


class _ArtifactCache:
    """Keep loaded artifacts around between scoring requests.

    Invalidates on the MoN file's mtime, so rebuilding an artifact in place
    is picked up without restarting the service.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: dict[str, tuple[int, ModelArtifact]] = {}

    def get(self, directory: str) -> ModelArtifact:
        key = str(Path(directory).resolve())
        stamp = (Path(key) / MON_FILENAME).stat().st_mtime_ns if (Path(key) / MON_FILENAME).is_file() else -1
        with self._lock:
            hit = self._entries.get(key)
            if hit is not None and hit[0] == stamp:
                return hit[1]
        artifact = load_artifact(directory)
        with self._lock:
            self._entries[key] = (stamp, artifact)
        return artifact


def create_app() -> FastAPI:
    app = FastAPI(
        title="mondet",
        version=__version__,
        description="Model-of-normality anomaly detection over feature tensors",
    )
    cache = _ArtifactCache()

    @app.exception_handler(MondetError)
    async def _domain_error(request: Request, exc: MondetError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"error": type(exc).__name__, "detail": str(exc)}
        )

    @app.exception_handler(OSError)
    async def _os_error(request: Request, exc: OSError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"error": type(exc).__name__, "detail": str(exc)}
        )

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError) -> JSONResponse:
        # bad parameter combinations surface as ValueError (e.g. synth config)
        return JSONResponse(
            status_code=400, content={"error": type(exc).__name__, "detail": str(exc)}
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/synth", response_model=SynthResponse, responses=_ERROR_RESPONSES)
    def synth(req: SynthRequest) -> SynthResponse:
        config = SynthConfig(
            **req.model_dump(exclude={"out_dir"})
        )
        summary = run_synth(config, req.out_dir)
        return SynthResponse(**summary.__dict__)

    @app.post("/build-mon", response_model=BuildResponse, responses=_ERROR_RESPONSES)
    def build(req: BuildRequest) -> BuildResponse:
        summary = run_build(req.manifest, req.artifact)
        return BuildResponse(
            artifact=summary.artifact_dir,
            n=summary.n,
            n_calibration=summary.n_calibration,
            height=summary.height,
            width=summary.width,
            channels=summary.channels,
            thresholds=summary.thresholds,
        )

    @app.post("/score", response_model=ScoreResponse, responses=_ERROR_RESPONSES)
    def score(req: ScoreRequest) -> ScoreResponse:
        summary = run_score(req.artifact, req.manifest, req.out, threads=req.threads)
        return ScoreResponse(
            out=summary.out_csv,
            n_scored=summary.n_scored,
            seconds_per_image_mean=summary.seconds_per_image_mean,
            seconds_per_image_std=summary.seconds_per_image_std,
        )

    @app.post("/evaluate", response_model=EvaluateResponse, responses=_ERROR_RESPONSES)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        summary = run_evaluate(
            report_csv=req.report_out,
            scatter_csv=req.scatter_out,
            scores_csv=req.scores,
            artifact_dir=req.artifact,
            manifest_path=req.manifest,
        )
        return EvaluateResponse(
            report=summary.report_csv,
            scatter=summary.scatter_csv,
            per_threshold_auc=summary.per_threshold_auc,
            max_auc=summary.max_auc,
            sweep_auc_max=summary.sweep_auc_max,
            sweep_auc_mean=summary.sweep_auc_mean,
        )

    @app.post("/score-tensor", response_model=TensorScoreResponse, responses=_ERROR_RESPONSES)
    def score_tensor(req: TensorScoreRequest) -> TensorScoreResponse:
        expected = req.height * req.width * req.channels
        if len(req.values) != expected:
            raise InvalidDims(
                f"dims {req.height}x{req.width}x{req.channels} need {expected} values, "
                f"got {len(req.values)}"
            )
        tensor = FeatureTensor(
            np.asarray(req.values, dtype=np.float64).reshape(req.height, req.width, req.channels)
        )
        artifact = cache.get(req.artifact)
        score = image_score(distance_heatmap(tensor, artifact.mon))
        verdicts = {
            name: classify(score, artifact.thresholds, name).verdict for name in THRESHOLD_NAMES
        }
        return TensorScoreResponse(d_mean=score.d_mean, d_max=score.d_max, verdicts=verdicts)

    return app

"""Pydantic request/response models for the HTTP surface."""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    error: str
    detail: str


class SynthRequest(BaseModel):
    out_dir: str
    height: int = 14
    width: int = 14
    channels: int = 192
    n_normal_mon: int = 64
    n_normal_eval: int = 64
    n_anomalous: int = 32
    noise_sigma: float = 1.0
    bump_amplitude: float = 3.0
    bump_height: int = 3
    bump_width: int = 3
    seed: int = Field(default=0, ge=0, lt=2**64)


class SynthResponse(BaseModel):
    out_dir: str
    manifest_csv: str
    n_tensors: int


class BuildRequest(BaseModel):
    manifest: str
    artifact: str


class BuildResponse(BaseModel):
    artifact: str
    n: int
    n_calibration: int
    height: int
    width: int
    channels: int
    thresholds: dict[str, float]


class ScoreRequest(BaseModel):
    artifact: str
    manifest: str
    out: str
    threads: int | None = Field(default=1, description="worker count; null means one per CPU")


class ScoreResponse(BaseModel):
    out: str
    n_scored: int
    seconds_per_image_mean: float
    seconds_per_image_std: float


class EvaluateRequest(BaseModel):
    report_out: str
    scatter_out: str
    scores: str | None = None
    artifact: str | None = None
    manifest: str | None = None

    @model_validator(mode="after")
    def _one_input_form(self) -> "EvaluateRequest":
        from_csv = self.scores is not None
        from_artifact = self.artifact is not None and self.manifest is not None
        if from_csv == from_artifact:
            raise ValueError("provide either scores, or artifact and manifest")
        return self


class EvaluateResponse(BaseModel):
    report: str
    scatter: str
    per_threshold_auc: dict[str, float]
    max_auc: float
    sweep_auc_max: float
    sweep_auc_mean: float


class TensorScoreRequest(BaseModel):
    """Score one in-memory feature tensor against a persisted artifact."""

    artifact: str
    height: int = Field(ge=1)
    width: int = Field(ge=1)
    channels: int = Field(ge=1)
    values: list[float] = Field(description="row-major (h, w, c) order")


class TensorScoreResponse(BaseModel):
    d_mean: float
    d_max: float
    verdicts: dict[str, str]

"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class DetectRequest(BaseModel):
    data_dir: str
    out_path: str
    config_path: str | None = None
    predictions_dir: str | None = None
    overrides: dict[str, str | int | float] = Field(default_factory=dict)


class ChannelAbort(BaseModel):
    channel_id: str
    code: str
    message: str


class DetectResponse(BaseModel):
    channels: list[str]
    aborted: list[ChannelAbort]
    config_hash: str
    out_path: str
    method: str


class MetricsRowModel(BaseModel):
    method: str
    slice_name: str
    precision: float | None
    recall: float | None
    f_beta: float | None
    beta: float
    tp: int
    fp: int
    fn: int


class EvaluateRequest(BaseModel):
    results_path: str
    labels_path: str
    beta: float = 0.5


class EvaluateResponse(BaseModel):
    rows: list[MetricsRowModel]
    table: str


class CompareRequest(BaseModel):
    results_paths: list[str]
    labels_path: str
    beta: float = 0.5


class CompareResponse(BaseModel):
    rows: list[MetricsRowModel]
    table: str
    csv: str


class LabelRequest(BaseModel):
    results_path: str
    feedback_path: str
    channel_id: str
    start: int
    end: int
    verdict: str  # tp | fp


class LabelResponse(BaseModel):
    appended: bool
    score: float
    warning: str | None = None


class SequenceModel(BaseModel):
    start: int
    end: int
    peak_index: int
    peak_value: float
    score: float
    status: str


class DiagnosticModel(BaseModel):
    batch: int
    start: int
    end: int
    warm_up: bool
    degenerate: bool
    epsilon: float | None
    z: float | None
    objective: float | None
    n_anomalous: int


class InspectResponse(BaseModel):
    channel_id: str
    method: str
    config_hash: str
    sequences: list[SequenceModel]
    diagnostics: list[DiagnosticModel]


class HealthResponse(BaseModel):
    status: str
    version: str

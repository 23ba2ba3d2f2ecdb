"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class IngestRequest(BaseModel):
    records: str
    embeddings: Optional[str] = None


class IngestResponse(BaseModel):
    records: int
    rows: Optional[int] = None
    dim: Optional[int] = None
    encoder_tag: Optional[str] = None


class RetrieveRequest(BaseModel):
    store: str
    records: Optional[str] = None
    query_id: Optional[str] = None
    query_text: Optional[str] = None
    k: int = 10
    metric: str = "neg_euclidean"
    order: str = "default"
    farthest: bool = False
    exporter_url: Optional[str] = None


class Neighbor(BaseModel):
    index: int
    id: str
    score: float


class RetrieveResponse(BaseModel):
    metric: str
    order: str
    neighbors: list[Neighbor]


class ExperimentConfigModel(BaseModel):
    """Mirror of the harness config; unset fields fall back to its defaults."""

    train_records: str
    eval_records: str
    train_embeddings: Optional[str] = None
    eval_embeddings: Optional[str] = None
    method: str = "kate"
    metric: str = "neg_euclidean"
    k: Optional[int] = None
    order: str = "default"
    trials: int = 1
    master_seed: int = 0
    template: Optional[str] = None
    task: str = "qa"
    budget: int = 2048
    counter: str = "whitespace"
    backend: dict = Field(default_factory=lambda: {"kind": "mock_nearest_echo"})
    max_in_flight: int = 4
    max_tokens: Optional[int] = None
    eval_limit: Optional[int] = None
    study_size: int = 100
    sweep: Optional[dict] = None


class RunRequest(BaseModel):
    config: ExperimentConfigModel
    output_dir: Optional[str] = None


class RunSummary(BaseModel):
    metric: str
    trials: list[float]
    mean: float
    std: float
    n_eval: int
    output_dir: Optional[str] = None


class SweepRequest(BaseModel):
    config: ExperimentConfigModel
    output_dir: str


class SweepResponse(BaseModel):
    points: list[RunSummary]
    csv_path: str


class StudySide(BaseModel):
    aggregate: float
    n: int
    k: int


class StudyResponse(BaseModel):
    metric: str
    closest: StudySide
    farthest: StudySide
    gap: float


class ReportRequest(BaseModel):
    report_dir: str


class ReportResponse(BaseModel):
    metric: str
    trials: list[float]
    mean: float
    std: float
    stored_mean: float
    matches_stored: bool

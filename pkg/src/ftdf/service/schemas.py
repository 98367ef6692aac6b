"""Request and response models for the recognition service."""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorPayload(BaseModel):
    error: str
    family: str  # config | data | model
    detail: str


class SynthRequest(BaseModel):
    out: str = "."
    classes: Optional[List[str]] = None
    traces_per_class: int = 10
    duration_s: float = 4352.0
    fs: float = 1.0
    seed: int = 0
    noise_scale: float = 1.0


class SynthResponse(BaseModel):
    manifest: str
    n_traces: int
    labels: List[str]


class PipelineOptions(BaseModel):
    """Settings shared by the feature/training endpoints; defaults mirror the
    run configuration."""

    window_len: int = 1024
    overlap: float = 0.25
    scheme: str = "ftdf"
    pair_a: List[str] = ["madf", "iamf"]
    pair_b: List[str] = ["rmsf", "wlf"]
    lags: List[int] = [1, 2, 3]
    include_raw: bool = True
    sscf_threshold: float = 1e-10
    ar_order: int = 15
    rms_literal: bool = False
    classifier: str = "ebt"
    n_trees: int = 30
    max_splits: int = 42000
    min_leaf: int = 1
    knn_k: int = 1
    knn_metric: str = "euclidean"
    knn_weighting: str = "uniform"
    test_fraction: float = 0.25
    folds: int = 10
    seed: int = 0
    threads: int = 1


class ExtractRequest(PipelineOptions):
    manifest: str
    out: str = "."
    descriptors: Optional[List[str]] = None
    force: bool = False


class ExtractResponse(BaseModel):
    written: int
    skipped: int
    files: List[str]


class FuseRequest(PipelineOptions):
    manifest: str
    out: str = "."


class FuseResponse(BaseModel):
    train_matrix: str
    test_matrix: str
    train_rows: int
    test_rows: int
    columns: List[str]


class ReportModel(BaseModel):
    accuracy: float
    macro_f: float
    per_class: Dict[str, Dict[str, float]]
    labels: List[str]
    confusion: List[List[int]]
    config: Dict[str, object] = {}


class TrainRequest(PipelineOptions):
    manifest: str
    out: str = "."


class TrainResponse(BaseModel):
    model: str
    report: ReportModel
    report_files: List[str]


class EvalRequest(PipelineOptions):
    manifest: Optional[str] = None
    model: Optional[str] = None
    matrix: Optional[str] = None
    out: str = "."
    protocol: str = "holdout"


class EvalResponse(BaseModel):
    report: ReportModel
    report_files: List[str]


class SweepRequest(PipelineOptions):
    manifest: str
    out: str = "."
    lengths: List[int] = [64, 128, 256, 512, 1024, 2048, 3072, 4096]


class SweepRow(BaseModel):
    scheme: str
    window_len: int
    accuracy: float
    macro_f: float
    runtime_ms: int


class SweepResponse(BaseModel):
    table: str
    rows: List[SweepRow]


class PredictRequest(BaseModel):
    model: str
    trace: Optional[str] = None
    samples: Optional[List[float]] = None
    fs: float = 1.0


class PredictResponse(BaseModel):
    windows: List[int]
    predictions: List[str]
    majority: str

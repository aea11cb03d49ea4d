"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class FitRecord(BaseModel):
    c: Optional[float] = None
    seed: Optional[int] = None
    crop: int
    a: float
    slope: float
    y: float
    L: float
    residual: float
    usable: bool
    concave_at_floor: bool


class MeshParams(BaseModel):
    mesh_start: float = Field(0.05, gt=0)
    mesh_stop: float = Field(2.0, gt=0)
    mesh_step: float = Field(0.05, gt=0)


class ProbeRequest(MeshParams):
    d: Literal[2, 3] = 3
    n_max: int = Field(200, ge=1)
    M: Optional[int] = Field(None, ge=1)
    c: float = Field(0.0, ge=0)
    seed: int = Field(0, ge=0)
    convention: Literal["half", "full"] = "half"
    crop: Optional[int] = Field(None, ge=0)
    include_coefficients: bool = False


class ProbeResponse(BaseModel):
    c: float
    seed: int
    d: int
    M: int
    n_max: int
    convention: str
    truncation_flag: bool
    breakdown_step: Optional[int]
    distances: list[float]
    alpha: Optional[list[float]] = None
    beta: Optional[list[float]] = None
    fit: Optional[FitRecord] = None


class AnalyzeRequest(MeshParams):
    distances: list[float] = Field(min_length=4)
    crop: Optional[int] = Field(None, ge=0)
    c: Optional[float] = None
    seed: Optional[int] = None


class SweepRequest(BaseModel):
    """Mirrors the experiment config file."""

    model_config = ConfigDict(extra="forbid")

    d: Literal[2, 3] = 3
    n_max: int = Field(200, ge=1)
    M: Optional[int] = None
    c_values: list[float] = Field(default_factory=lambda: [0.0], min_length=1)
    realizations_per_c: int | list[int] = 1
    master_seed: int = 0
    crop: Optional[int] = None
    mesh_start: float = 0.05
    mesh_stop: float = 2.0
    mesh_step: float = 0.05
    gap_threshold: float = 5e-3
    l_threshold: float = 0.9
    convention: Literal["half", "full"] = "half"
    output_dir: Optional[str] = None
    worker_count: int = Field(1, ge=1)
    store_basis: bool = False
    truncation_free: bool = True
    memory_budget: Optional[int | str] = None
    plots: bool = False


class ManifestEntry(BaseModel):
    c_index: int
    r_index: int
    c: float
    seed: int
    path: str
    status: Literal["done", "failed"]
    error: Optional[str] = None


class SweepStatus(BaseModel):
    id: str
    status: Literal["queued", "running", "done", "failed"]
    output_dir: str
    error: Optional[str] = None
    manifest: list[ManifestEntry] = Field(default_factory=list)


class MinimaRow(BaseModel):
    c: float
    P: Optional[float]
    y: Optional[float]
    L: Optional[float]
    verdict: Optional[str]


class AverageRow(BaseModel):
    c: float
    a_tilde: Optional[float]
    y_tilde: Optional[float]
    L_tilde: Optional[float]


class ReportRequest(BaseModel):
    results_dir: str
    crop: Optional[int] = None


class ReportResponse(BaseModel):
    results_dir: str
    minima: list[MinimaRow]
    averages: list[AverageRow]
    caveat: str
    text: str


class BulkRequest(BaseModel):
    c_values: list[float] = Field(min_length=1)
    n: int = Field(ge=0)
    realizations: int = Field(1, ge=1)
    d: Literal[2, 3] = 3
    M: Optional[int] = None
    master_seed: int = 0
    kind: Literal["lanczos", "power"] = "lanczos"
    convention: Literal["half", "full"] = "half"
    output_dir: Optional[str] = None


class ProfileRecord(BaseModel):
    c: float
    n: int
    count: int
    seeds: list[int]
    E: list[float]


class OrthoRequest(BaseModel):
    c_values: list[float] = Field(min_length=1)
    n_max: int = Field(150, ge=1)
    M: int = Field(40, ge=1)
    d: Literal[2, 3] = 3
    master_seed: int = 0
    convention: Literal["half", "full"] = "half"
    output_dir: Optional[str] = None


class OrthoRow(BaseModel):
    c: float
    seed: int
    n_max: int
    M: int
    Q: float
    truncation_flag: bool

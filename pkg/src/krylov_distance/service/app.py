"""FastAPI wrapper around the experiment library.

Single probes and analyses run inline. Sweeps are queued on one background
worker thread (probes are memory bound, so they are not run side by side) and
polled by id.
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import AnalysisError, ConfigError, KrylovDistanceError, SizingError
from ..runner import (
    CAVEAT,
    ExperimentConfig,
    default_output_dir,
    format_report,
    probe_record,
    run_bulk,
    run_ortho,
    run_sweep,
    write_report,
)
from ..scaling import default_crop, make_mesh, optimal_a
from . import schemas

app = FastAPI(title="krylov-distance", version=__version__)

_jobs: dict[str, schemas.SweepStatus] = {}
_jobs_lock = threading.Lock()
_executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="sweep")


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, SizingError):
        return HTTPException(status_code=413, detail=str(exc))
    if isinstance(exc, (ConfigError, AnalysisError, KrylovDistanceError)):
        return HTTPException(status_code=422, detail=str(exc))
    return HTTPException(status_code=500, detail=str(exc))


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/probe", response_model=schemas.ProbeResponse)
def probe_endpoint(req: schemas.ProbeRequest) -> schemas.ProbeResponse:
    try:
        rec = probe_record(
            d=req.d, n_max=req.n_max, M=req.M, c=req.c, seed=req.seed, convention=req.convention,
            crop=req.crop, mesh=make_mesh(req.mesh_start, req.mesh_stop, req.mesh_step),
            include_coefficients=req.include_coefficients,
        )
    except KrylovDistanceError as exc:
        raise _http_error(exc) from exc
    return schemas.ProbeResponse(**rec)


@app.post("/analyze", response_model=schemas.FitRecord)
def analyze_endpoint(req: schemas.AnalyzeRequest) -> schemas.FitRecord:
    values = np.asarray(req.distances, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise HTTPException(status_code=422, detail="distances must be finite")
    crop = default_crop(values.size - 1) if req.crop is None else req.crop
    try:
        fit = optimal_a(values, crop, make_mesh(req.mesh_start, req.mesh_stop, req.mesh_step))
    except KrylovDistanceError as exc:
        raise _http_error(exc) from exc
    return schemas.FitRecord(**fit.record(req.c, req.seed))


def _run_job(job_id: str, config: ExperimentConfig) -> None:
    with _jobs_lock:
        _jobs[job_id].status = "running"
    try:
        outcome = run_sweep(config)
        manifest = [schemas.ManifestEntry(**m) for m in outcome.manifest]
        status = "failed" if outcome.failed else "done"
        error = None
    except Exception as exc:  # reported through the status endpoint
        manifest, status, error = [], "failed", f"{type(exc).__name__}: {exc}"
    with _jobs_lock:
        job = _jobs[job_id]
        job.status, job.manifest, job.error = status, manifest, error


@app.post("/sweeps", response_model=schemas.SweepStatus, status_code=202)
def submit_sweep(req: schemas.SweepRequest) -> schemas.SweepStatus:
    job_id = uuid.uuid4().hex[:12]
    data = req.model_dump()
    if data["output_dir"] is None:
        data["output_dir"] = str(default_output_dir() / f"sweep-{job_id}")
    try:
        config = ExperimentConfig.from_dict(data)
        config.validate()
    except ConfigError as exc:
        raise _http_error(exc) from exc
    status = schemas.SweepStatus(id=job_id, status="queued", output_dir=str(config.output_dir))
    with _jobs_lock:
        _jobs[job_id] = status
    _executor.submit(_run_job, job_id, config)
    return status


@app.get("/sweeps/{job_id}", response_model=schemas.SweepStatus)
def sweep_status(job_id: str) -> schemas.SweepStatus:
    with _jobs_lock:
        job = _jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown sweep {job_id}")
        return job.model_copy(deep=True)


def _report_response(results_dir: Path, crop: int | None = None) -> schemas.ReportResponse:
    try:
        report = write_report(results_dir, crop=crop)
    except (OSError, json.JSONDecodeError, KrylovDistanceError) as exc:
        raise _http_error(exc) from exc
    return schemas.ReportResponse(
        results_dir=str(results_dir),
        minima=[schemas.MinimaRow(**r) for r in report.minima_table()],
        averages=[schemas.AverageRow(**r) for r in report.averages_table()],
        caveat=CAVEAT,
        text=format_report(report),
    )


@app.get("/sweeps/{job_id}/report", response_model=schemas.ReportResponse)
def sweep_report(job_id: str) -> schemas.ReportResponse:
    job = sweep_status(job_id)
    if job.status in ("queued", "running"):
        raise HTTPException(status_code=409, detail=f"sweep {job_id} is {job.status}")
    return _report_response(Path(job.output_dir))


@app.post("/report", response_model=schemas.ReportResponse)
def report_endpoint(req: schemas.ReportRequest) -> schemas.ReportResponse:
    return _report_response(Path(req.results_dir), req.crop)


@app.post("/bulk", response_model=list[schemas.ProfileRecord])
def bulk_endpoint(req: schemas.BulkRequest) -> list[schemas.ProfileRecord]:
    out = req.output_dir or str(default_output_dir() / "bulk")
    try:
        averaged = run_bulk(
            out, req.c_values, req.n, req.realizations, d=req.d, M=req.M,
            master_seed=req.master_seed, kind=req.kind, convention=req.convention,
        )
    except KrylovDistanceError as exc:
        raise _http_error(exc) from exc
    return [
        schemas.ProfileRecord(c=c, n=p.n, count=p.count, seeds=p.seeds, E=p.values.tolist())
        for c, p in averaged.items()
    ]


@app.post("/ortho", response_model=list[schemas.OrthoRow])
def ortho_endpoint(req: schemas.OrthoRequest) -> list[schemas.OrthoRow]:
    out = req.output_dir or str(default_output_dir() / "ortho")
    try:
        rows = run_ortho(out, req.c_values, n_max=req.n_max, M=req.M, d=req.d,
                         master_seed=req.master_seed, convention=req.convention)
    except KrylovDistanceError as exc:
        raise _http_error(exc) from exc
    return [schemas.OrthoRow(**r) for r in rows]

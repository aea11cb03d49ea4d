"""Seeded sweeps over disorder values and realizations, persistence and reports.

Layout of a run directory::

    <output_dir>/config.json
    <output_dir>/manifest.json
    <output_dir>/c=<c>/r=<index>/series.csv  (+ series.json sidecar)
    <output_dir>/c=<c>/r=<index>/result.json
    <output_dir>/report.csv, averages.csv, verdicts.json, report.txt
"""

from __future__ import annotations

import concurrent.futures as cf
import dataclasses
import json
import logging
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from .errors import AnalysisError, ConfigError, KrylovDistanceError
from .hamiltonian import Convention, cell_seed, sample_potential
from .io import dump_json, fmt, read_series, write_series
from .lanczos import DistanceSeries, ortho_diagnostic, probe, probe_with_basis
from .lattice import BYTES_PER_VALUE, LatticeSpec, make_lattice, memory_budget, parse_bytes
from .scaling import (
    GAP_THRESHOLD,
    L_THRESHOLD,
    MESH_START,
    MESH_STEP,
    MESH_STOP,
    CriterionVerdict,
    RescaleFit,
    average_series,
    default_crop,
    evaluate_criterion,
    make_mesh,
    optimal_a,
)

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "KRYLOV_DISTANCE_OUTPUT_DIR"
CAVEAT = (
    "Verdicts only ever certify delocalization. A disorder value that fails the "
    "criterion is inconclusive: a distance tending to zero for a single target "
    "vector does not imply localization."
)


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "runs"))


def cell_dir(output_dir: Path, c: float, r_index: int) -> Path:
    return Path(output_dir) / f"c={float(c)!r}" / f"r={r_index}"


@dataclass
class ExperimentConfig:
    d: int = 3
    n_max: int = 200
    M: int | None = None
    c_values: list[float] = field(default_factory=lambda: [0.0])
    realizations_per_c: int | list[int] = 1
    master_seed: int = 0
    crop: int | None = None
    mesh_start: float = MESH_START
    mesh_stop: float = MESH_STOP
    mesh_step: float = MESH_STEP
    gap_threshold: float = GAP_THRESHOLD
    l_threshold: float = L_THRESHOLD
    convention: str = Convention.HALF.value
    output_dir: str | None = None
    worker_count: int = 1
    store_basis: bool = False
    truncation_free: bool = True
    memory_budget: int | str | None = None
    plots: bool = False

    def __post_init__(self) -> None:
        if self.M is None:
            self.M = self.n_max + 1
        if self.crop is None:
            self.crop = default_crop(self.n_max)
        if self.output_dir is None:
            self.output_dir = str(default_output_dir())
        self.c_values = [float(c) for c in self.c_values]
        if self.memory_budget is not None:
            self.memory_budget = parse_bytes(self.memory_budget)

    @property
    def budget(self) -> int:
        return memory_budget() if self.memory_budget is None else int(self.memory_budget)

    @property
    def mesh(self) -> np.ndarray:
        return make_mesh(self.mesh_start, self.mesh_stop, self.mesh_step)

    def realization_counts(self) -> list[int]:
        if isinstance(self.realizations_per_c, int):
            return [self.realizations_per_c] * len(self.c_values)
        counts = [int(x) for x in self.realizations_per_c]
        if len(counts) != len(self.c_values):
            raise ConfigError("realizations_per_c list must match c_values in length")
        return counts

    def probe_bytes(self) -> int:
        """Working set of one cell: three fields, the potential, and the stored basis if any."""
        sites = (2 * self.M + 1) ** self.d
        arrays = 4 + (self.n_max + 1 if self.store_basis else 0)
        return arrays * sites * BYTES_PER_VALUE

    def validate(self) -> None:
        problems = []
        if self.d not in (2, 3):
            problems.append(f"d must be 2 or 3, got {self.d}")
        if self.n_max < 1:
            problems.append("n_max must be >= 1")
        if self.M < 1:
            problems.append("M must be >= 1")
        if self.truncation_free and self.M < self.n_max + 1:
            problems.append(f"truncation-free runs need M >= n_max + 1 = {self.n_max + 1}, got M={self.M}")
        if not self.c_values:
            problems.append("c_values is empty")
        if any(not (c >= 0 and math.isfinite(c)) for c in self.c_values):
            problems.append("disorder values must be finite and >= 0")
        if len(set(self.c_values)) != len(self.c_values):
            problems.append("c_values contains duplicates")
        try:
            if any(n < 1 for n in self.realization_counts()):
                problems.append("realization counts must be >= 1")
        except ConfigError as exc:
            problems.append(str(exc))
        if not 0 <= self.crop <= self.n_max - 3:
            problems.append(f"crop must leave at least 3 points (crop={self.crop}, n_max={self.n_max})")
        for name in ("mesh_start", "mesh_stop", "mesh_step", "gap_threshold", "l_threshold"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if self.mesh_stop < self.mesh_start:
            problems.append("mesh_stop must be >= mesh_start")
        try:
            Convention(self.convention)
        except ValueError:
            problems.append(f"convention must be 'half' or 'full', got {self.convention!r}")
        if self.worker_count < 1:
            problems.append("worker_count must be >= 1")
        if not problems and self.probe_bytes() > self.budget:
            problems.append(f"one cell needs {self.probe_bytes()} bytes, over the {self.budget}-byte budget")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a YAML (or JSON) key/value file into an ExperimentConfig."""
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping of keys to values")
    return ExperimentConfig.from_dict(data)


@dataclass(frozen=True)
class Cell:
    c_index: int
    r_index: int
    c: float
    seed: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.c_index, self.r_index)


def plan_cells(config: ExperimentConfig) -> list[Cell]:
    cells = []
    for ci, (c, count) in enumerate(zip(config.c_values, config.realization_counts())):
        for ri in range(count):
            cells.append(Cell(ci, ri, c, cell_seed(config.master_seed, ci, ri)))
    return cells


@dataclass
class RealizationResult:
    c: float
    seed: int
    c_index: int
    r_index: int
    series_path: Path
    fit: RescaleFit
    truncation_flag: bool
    breakdown_step: int | None
    wall_time: float = 0.0
    peak_memory: int = 0
    ortho_Q: float | None = None

    def record(self, config: ExperimentConfig) -> dict[str, Any]:
        rec = {
            "c": self.c,
            "seed": self.seed,
            "c_index": self.c_index,
            "r_index": self.r_index,
            "series": self.series_path.name,
            "d": config.d,
            "M": config.M,
            "n_max": config.n_max,
            "convention": config.convention,
            "truncation_flag": self.truncation_flag,
            "breakdown_step": self.breakdown_step,
            "fit": self.fit.record(self.c, self.seed),
            "timing": {"wall_time_s": self.wall_time, "peak_memory_bytes": self.peak_memory},
        }
        if self.ortho_Q is not None:
            rec["ortho_Q"] = self.ortho_Q
        return rec

    @classmethod
    def from_record(cls, rec: dict[str, Any], directory: Path) -> RealizationResult:
        timing = rec.get("timing", {})
        return cls(
            c=float(rec["c"]), seed=int(rec["seed"]), c_index=int(rec["c_index"]), r_index=int(rec["r_index"]),
            series_path=Path(directory) / rec["series"], fit=RescaleFit.from_record(rec["fit"]),
            truncation_flag=bool(rec["truncation_flag"]), breakdown_step=rec.get("breakdown_step"),
            wall_time=float(timing.get("wall_time_s", 0.0)), peak_memory=int(timing.get("peak_memory_bytes", 0)),
            ortho_Q=rec.get("ortho_Q"),
        )


def run_cell(config: ExperimentConfig, cell: Cell) -> RealizationResult:
    """Sample, probe, persist and fit one (c, realization) cell."""
    t0 = time.perf_counter()
    spec = make_lattice(config.d, config.M, budget=config.budget)
    pot = sample_potential(spec, cell.c, cell.seed, config.convention)
    ortho_q = None
    if config.store_basis:
        series, K = probe_with_basis(pot, n_max=config.n_max, budget=config.budget)
        ortho_q = ortho_diagnostic(K)
        del K
    else:
        series = probe(pot, n_max=config.n_max, budget=config.budget)
    del pot
    out = cell_dir(Path(config.output_dir), cell.c, cell.r_index)
    out.mkdir(parents=True, exist_ok=True)
    series_path = out / "series.csv"
    write_series(series_path, series)
    fit = optimal_a(series, config.crop, config.mesh)
    result = RealizationResult(
        c=cell.c, seed=cell.seed, c_index=cell.c_index, r_index=cell.r_index, series_path=series_path,
        fit=fit, truncation_flag=series.truncation_flag, breakdown_step=series.breakdown_step,
        wall_time=time.perf_counter() - t0, peak_memory=config.probe_bytes(), ortho_Q=ortho_q,
    )
    dump_json(out / "result.json", result.record(config))
    if config.plots:
        from .plotting import plot_series

        plot_series(series, fit, out / "series.svg")
    return result


@dataclass
class SweepOutcome:
    results: list[RealizationResult]
    verdicts: dict[float, CriterionVerdict]
    manifest: list[dict[str, Any]]
    output_dir: Path

    @property
    def failed(self) -> list[dict[str, Any]]:
        return [m for m in self.manifest if m["status"] != "done"]


def max_concurrency(config: ExperimentConfig) -> int:
    """Worker count capped so that concurrent cells fit the memory budget."""
    fit = max(1, config.budget // max(config.probe_bytes(), 1))
    return max(1, min(config.worker_count, fit))


def run_sweep(config: ExperimentConfig) -> SweepOutcome:
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(out / "config.json", config.to_dict())
    cells = plan_cells(config)
    workers = max_concurrency(config)
    log.info("sweep: %d cells, %d worker(s), %d bytes per cell", len(cells), workers, config.probe_bytes())

    done: dict[tuple[int, int], RealizationResult] = {}
    errors: dict[tuple[int, int], str] = {}
    if workers == 1:
        for cell in cells:
            try:
                done[cell.key] = run_cell(config, cell)
            except (OSError, KrylovDistanceError) as exc:
                errors[cell.key] = f"{type(exc).__name__}: {exc}"
    else:
        # spawn, not fork: a forked child inherits the parent's numba thread
        # pool in an unusable state once any parallel kernel has run
        ctx = multiprocessing.get_context("spawn")
        with cf.ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futures = {pool.submit(run_cell, config, cell): cell for cell in cells}
            for fut in cf.as_completed(futures):
                cell = futures[fut]
                try:
                    done[cell.key] = fut.result()
                except (OSError, KrylovDistanceError) as exc:
                    errors[cell.key] = f"{type(exc).__name__}: {exc}"

    manifest = []
    for cell in cells:
        entry = {
            "c_index": cell.c_index, "r_index": cell.r_index, "c": cell.c, "seed": cell.seed,
            "path": str(cell_dir(Path("."), cell.c, cell.r_index)),
            "status": "done" if cell.key in done else "failed",
        }
        if cell.key in errors:
            entry["error"] = errors[cell.key]
        manifest.append(entry)
    dump_json(out / "manifest.json", {"cells": manifest})

    results = [done[c.key] for c in cells if c.key in done]
    verdicts = {}
    if results:
        verdicts = {row.c: row.verdict for row in write_report(out, config).rows}
    return SweepOutcome(results, verdicts, manifest, out)


@dataclass
class AnalysisEntry:
    """Outcome of refitting one persisted series: either ``fit`` or ``error`` is set."""

    path: Path
    series: DistanceSeries | None = None
    fit: RescaleFit | None = None
    error: str | None = None

    def record(self) -> dict[str, Any]:
        if self.fit is None:
            return {"file": str(self.path), "error": self.error}
        c = self.series.c if math.isfinite(self.series.c) else None
        seed = self.series.seed if self.series.seed >= 0 else None
        return {"file": str(self.path), **self.fit.record(c, seed)}


def analyze(
    series_files: Iterable[str | Path], crop: int | None = None, mesh: Sequence[float] | None = None
) -> list[AnalysisEntry]:
    """Refit persisted series, one entry per file; a bad file does not stop the rest."""
    out = []
    for path in series_files:
        path = Path(path)
        try:
            series = read_series(path)
            use_crop = default_crop(series.n_max) if crop is None else crop
            out.append(AnalysisEntry(path, series, optimal_a(series, use_crop, mesh)))
        except KrylovDistanceError as exc:
            out.append(AnalysisEntry(path, error=str(exc)))
    return out


def load_results(results_dir: str | Path) -> list[RealizationResult]:
    results_dir = Path(results_dir)
    results = []
    for rec_path in sorted(results_dir.glob("c=*/r=*/result.json")):
        rec = json.loads(rec_path.read_text())
        results.append(RealizationResult.from_record(rec, rec_path.parent))
    results.sort(key=lambda r: (r.c_index, r.r_index))
    return results


@dataclass
class ReportRow:
    c: float
    verdict: CriterionVerdict
    average_fit: RescaleFit | None

    @property
    def P(self) -> float:
        return self.verdict.fraction_usable


@dataclass
class Report:
    rows: list[ReportRow]
    missing: list[float]

    def minima_table(self) -> list[dict[str, Any]]:
        table = [
            {"c": r.c, "P": r.P, "y": r.verdict.min_y, "L": r.verdict.min_L,
             "verdict": "delocalized" if r.verdict.delocalized else "no conclusion"}
            for r in self.rows
        ]
        table += [{"c": c, "P": None, "y": None, "L": None, "verdict": None} for c in self.missing]
        return sorted(table, key=lambda row: row["c"])

    def averages_table(self) -> list[dict[str, Any]]:
        table = []
        for r in self.rows:
            fit = r.average_fit
            table.append({
                "c": r.c,
                "a_tilde": fit.a if fit is not None and fit.usable else None,
                "y_tilde": fit.intercept_y if fit is not None else None,
                "L_tilde": fit.intercept_L if fit is not None else None,
            })
        table += [{"c": c, "a_tilde": None, "y_tilde": None, "L_tilde": None} for c in self.missing]
        return sorted(table, key=lambda row: row["c"])


def build_report(
    results_dir: str | Path,
    crop: int | None = None,
    mesh: Sequence[float] | None = None,
    l_threshold: float = L_THRESHOLD,
    gap_threshold: float = GAP_THRESHOLD,
    expected_c: Sequence[float] = (),
) -> Report:
    results = load_results(results_dir)
    if not results:
        raise AnalysisError(f"{results_dir}: no result.json files found")
    by_c: dict[float, list[RealizationResult]] = {}
    for r in results:
        by_c.setdefault(r.c, []).append(r)
    rows = []
    for c in sorted(by_c):
        group = by_c[c]
        verdict = evaluate_criterion([r.fit for r in group], c, l_threshold, gap_threshold)
        avg_fit = None
        try:
            series = [read_series(r.series_path) for r in group]
            avg = average_series(series)
            use_crop = group[0].fit.crop if crop is None else crop
            avg_fit = optimal_a(avg, use_crop, mesh)
        except (OSError, KrylovDistanceError) as exc:
            log.warning("c=%s: averaged fit unavailable: %s", c, exc)
        rows.append(ReportRow(c, verdict, avg_fit))
    missing = sorted(set(float(c) for c in expected_c) - set(by_c))
    return Report(rows, missing)


def _cell_text(v: Any, digits: int = 7) -> str:
    if v is None:
        return "N/A"
    if isinstance(v, float):
        return f"{v:.{digits}g}"
    return str(v)


def format_report(report: Report) -> str:
    lines = ["Per-disorder ensemble minima", ""]
    head = f"{'c':>8} {'P':>6} {'y':>12} {'L':>12}  verdict"
    lines += [head, "-" * len(head)]
    for row in report.minima_table():
        lines.append(
            f"{_cell_text(row['c']):>8} {_cell_text(row['P'], 3):>6} {_cell_text(row['y']):>12} "
            f"{_cell_text(row['L']):>12}  {row['verdict'] or 'N/A'}*"
        )
    lines += ["", "Averaged series", ""]
    head = f"{'c':>8} {'a_tilde':>8} {'y_tilde':>12} {'L_tilde':>12}"
    lines += [head, "-" * len(head)]
    for row in report.averages_table():
        lines.append(
            f"{_cell_text(row['c']):>8} {_cell_text(row['a_tilde'], 3):>8} "
            f"{_cell_text(row['y_tilde']):>12} {_cell_text(row['L_tilde']):>12}"
        )
    lines += ["", f"* {CAVEAT}", ""]
    return "\n".join(lines)


def _write_csv(path: Path, rows: list[dict[str, Any]], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row[col]
                cells.append("N/A" if v is None else fmt(v) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def write_report(
    results_dir: str | Path, config: ExperimentConfig | None = None, **overrides: Any
) -> Report:
    """Build the report and write report.csv, averages.csv, verdicts.json and report.txt."""
    results_dir = Path(results_dir)
    if config is None and (results_dir / "config.json").exists():
        config = ExperimentConfig.from_dict(json.loads((results_dir / "config.json").read_text()))
    kwargs: dict[str, Any] = {}
    if config is not None:
        kwargs = dict(
            crop=config.crop, mesh=config.mesh, l_threshold=config.l_threshold,
            gap_threshold=config.gap_threshold, expected_c=config.c_values,
        )
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    report = build_report(results_dir, **kwargs)
    _write_csv(results_dir / "report.csv", report.minima_table(), ["c", "P", "y", "L", "verdict"])
    _write_csv(results_dir / "averages.csv", report.averages_table(), ["c", "a_tilde", "y_tilde", "L_tilde"])
    dump_json(
        results_dir / "verdicts.json",
        {"caveat": CAVEAT, "verdicts": [r.verdict.as_dict() for r in report.rows]},
    )
    (results_dir / "report.txt").write_text(format_report(report))
    return report


def run_bulk(
    output_dir: str | Path,
    c_values: Sequence[float],
    n: int,
    realizations: int = 1,
    d: int = 3,
    M: int | None = None,
    master_seed: int = 0,
    kind: str = "lanczos",
    convention: str = Convention.HALF.value,
    plots: bool = False,
) -> dict[float, Any]:
    """Shell profiles of the n-th evolved vector for each (c, realization), plus per-c averages.

    Writes profiles/c=<c>/n=<n>/seed=<seed>.csv and profiles/c=<c>/n=<n>/averaged.csv.
    """
    from .bulk import averaged_profile, evolved_profile
    from .io import write_profile

    M = n + 1 if M is None else M
    spec = make_lattice(d, M)
    averaged = {}
    for ci, c in enumerate(c_values):
        profiles = []
        base = Path(output_dir) / "profiles" / f"c={float(c)!r}" / f"n={n}"
        base.mkdir(parents=True, exist_ok=True)
        for ri in range(realizations):
            seed = cell_seed(master_seed, ci, ri)
            pot = sample_potential(spec, c, seed, convention)
            prof = evolved_profile(pot, n, kind)
            del pot
            write_profile(base / f"seed={seed}.csv", prof.values)
            profiles.append(prof)
        avg = averaged_profile(profiles)
        write_profile(base / "averaged.csv", avg.values)
        averaged[float(c)] = avg
    if plots and averaged:
        from .plotting import plot_profiles

        plot_profiles(averaged, Path(output_dir) / "profiles" / f"averaged_n={n}.svg")
    return averaged


def run_ortho(
    output_dir: str | Path,
    c_values: Sequence[float],
    n_max: int = 150,
    M: int = 40,
    d: int = 3,
    master_seed: int = 0,
    convention: str = Convention.HALF.value,
) -> list[dict[str, Any]]:
    """Orthogonality loss Q of the stored Lanczos basis, one realization per c; writes ortho.csv."""
    spec = make_lattice(d, M)
    rows = []
    for ci, c in enumerate(c_values):
        seed = cell_seed(master_seed, ci, 0)
        pot = sample_potential(spec, c, seed, convention)
        series, K = probe_with_basis(pot, n_max=n_max)
        rows.append({"c": float(c), "seed": seed, "n_max": n_max, "M": M, "Q": ortho_diagnostic(K),
                     "truncation_flag": series.truncation_flag})
        del K, pot
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "ortho.csv", rows, ["c", "seed", "n_max", "M", "Q", "truncation_flag"])
    return rows


def probe_record(
    d: int = 3,
    n_max: int = 200,
    M: int | None = None,
    c: float = 0.0,
    seed: int = 0,
    convention: str = Convention.HALF.value,
    crop: int | None = None,
    mesh: Sequence[float] | None = None,
    include_coefficients: bool = False,
) -> dict[str, Any]:
    """One probe plus its fit, as a plain dict (the service's probe response)."""
    M = n_max + 1 if M is None else M
    spec = make_lattice(d, M)
    pot = sample_potential(spec, c, seed, convention)
    series = probe(pot, n_max=n_max)
    del pot
    crop = default_crop(n_max) if crop is None else crop
    fit = optimal_a(series, crop, mesh).record(series.c, series.seed) if crop <= n_max - 3 else None
    return {
        "c": series.c, "seed": series.seed, "d": d, "M": M, "n_max": n_max, "convention": series.convention,
        "truncation_flag": series.truncation_flag, "breakdown_step": series.breakdown_step,
        "distances": series.values.tolist(),
        "alpha": series.alpha.tolist() if include_coefficients else None,
        "beta": series.beta.tolist() if include_coefficients else None,
        "fit": fit,
    }

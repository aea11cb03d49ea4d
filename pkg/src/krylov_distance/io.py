"""On-disk formats: series CSV + JSON sidecar, fit records, shell profiles."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import AnalysisError
from .lanczos import DistanceSeries

SERIES_HEADER = ["n", "distance"]
PROFILE_HEADER = ["l", "E"]


def fmt(x: float) -> str:
    """Shortest text with 17 significant digits, enough to round-trip a double."""
    return f"{x:.17g}"


def sidecar_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def dump_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_series(path: str | Path, series: DistanceSeries, with_coefficients: bool = True) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SERIES_HEADER) + "\n")
        for n, v in enumerate(series.values):
            fh.write(f"{n},{fmt(float(v))}\n")
    meta = series.metadata()
    if not with_coefficients:
        meta.pop("alpha", None)
        meta.pop("beta", None)
    dump_json(sidecar_path(path), meta)


def read_series(path: str | Path) -> DistanceSeries:
    """Parse a series CSV (and its sidecar when present); AnalysisError on schema problems."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise AnalysisError(f"{path}: {exc}") from exc
    if not rows or [h.strip() for h in rows[0]] != SERIES_HEADER:
        raise AnalysisError(f"{path}: header must be 'n,distance'")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise AnalysisError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            n = int(row[0])
            v = float(row[1])
        except ValueError as exc:
            raise AnalysisError(f"{path}:{lineno}: {exc}") from exc
        if n != len(values):
            raise AnalysisError(f"{path}:{lineno}: expected n={len(values)}, got {n}")
        if not math.isfinite(v):
            raise AnalysisError(f"{path}:{lineno}: non-finite distance")
        values.append(v)
    if not values:
        raise AnalysisError(f"{path}: no data rows")
    meta: dict[str, Any] = {}
    side = sidecar_path(path)
    if side.exists():
        try:
            meta = json.loads(side.read_text())
        except json.JSONDecodeError as exc:
            raise AnalysisError(f"{side}: {exc}") from exc
    return DistanceSeries(
        c=float(meta.get("c", math.nan)),
        seed=int(meta.get("seed", -1)),
        n_max=len(values) - 1,
        values=np.array(values),
        truncation_flag=bool(meta.get("truncation_flag", False)),
        breakdown_step=meta.get("breakdown_step"),
        d=meta.get("d"),
        M=meta.get("M"),
        convention=meta.get("convention"),
        alpha=np.array(meta["alpha"]) if "alpha" in meta else None,
        beta=np.array(meta["beta"]) if "beta" in meta else None,
    )


def write_profile(path: str | Path, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(PROFILE_HEADER) + "\n")
        for l, e in enumerate(values):
            fh.write(f"{l},{fmt(float(e))}\n")


def read_profile(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != PROFILE_HEADER:
        raise AnalysisError(f"{path}: header must be 'l,E'")
    return np.array([float(r[1]) for r in rows[1:] if r])

"""Static SVG figures for distance curves and shell profiles (matplotlib, Agg)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_series(series, fit, path: str | Path) -> None:
    """Two panels: D^n against n, and the rescaled data with the fitted line."""
    plt = _pyplot()
    D = series.values
    n = np.arange(D.size)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    ax0.plot(n, D, ".", ms=3)
    ax0.axvline(fit.crop, color="0.6", lw=0.8)
    ax0.set_xlabel("n")
    ax0.set_ylabel("distance")
    start = max(fit.crop, 1)
    x = n[start:].astype(float) ** (-fit.a)
    ax1.plot(x, D[start:], ".", ms=3)
    xs = np.linspace(0.0, x.max(), 50)
    ax1.plot(xs, fit.intercept_y + fit.slope * xs, "-", lw=1, label=f"y={fit.intercept_y:.7f}")
    ax1.axhline(fit.intercept_L, color="C3", lw=0.8, ls="--", label=f"L={fit.intercept_L:.7f}")
    ax1.set_xlabel(f"n^(-{fit.a:g})")
    ax1.legend(fontsize=8)
    fig.suptitle(f"c={series.c:g}, seed={series.seed}")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_profiles(profiles: Mapping[float, object], path: str | Path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    for c, prof in sorted(profiles.items()):
        ax.plot(np.arange(prof.values.size), prof.values, lw=1, label=f"c={c:g}")
    ax.set_xlabel("taxicab radius l")
    ax.set_ylabel("E(l, n)")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)

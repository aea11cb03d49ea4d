"""Streaming Lanczos distance from a target delta to the Krylov orbit of a source delta.

With v_0 = delta_source and the three-term recurrence

    w = H v_k - alpha_k v_k - beta_k v_{k-1},   alpha_k = <H v_k, v_k>,
    beta_{k+1} = |w|,                           v_{k+1} = w / beta_{k+1},

the vectors v_0..v_n are an orthonormal basis of span{H^j delta_source : j <= n},
so the distance of delta_target to that span is

    D^n = sqrt(1 - sum_{j<=n} v_j(target)^2).

Only three fields are live at any time. No reorthogonalization is done; use
``probe_with_basis`` + ``ortho_diagnostic`` to measure the orthogonality loss.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, SizingError
from .hamiltonian import Potential, apply
from .lattice import Field, assign, axpy, delta_field, entry_at, inner, memory_budget, norm, scale, taxicab, zeros

log = logging.getLogger(__name__)

ORIGIN = (0, 0, 0)
TARGET = (1, 1, 1)
BREAKDOWN_RTOL = 1e-12


@dataclass
class LanczosState:
    """Live recurrence state after step ``k`` (``v_curr`` is v_k)."""

    v_prev: Field
    v_curr: Field
    k: int = 0
    alpha: list[float] = field(default_factory=list)
    beta: list[float] = field(default_factory=list)
    dist_sq: float = 1.0
    proj_coeffs: list[float] = field(default_factory=list)

    @property
    def distance(self) -> float:
        return math.sqrt(max(self.dist_sq, 0.0))


@dataclass
class DistanceSeries:
    """D^0..D^{n_max} for one disorder realization."""

    c: float
    seed: int
    n_max: int
    values: np.ndarray
    truncation_flag: bool = False
    breakdown_step: int | None = None
    d: int | None = None
    M: int | None = None
    convention: str | None = None
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.n_max + 1,):
            raise ContractError(f"series needs {self.n_max + 1} values, got {self.values.shape}")

    def __len__(self) -> int:
        return self.values.size

    def metadata(self) -> dict:
        meta = {
            "c": self.c,
            "seed": self.seed,
            "d": self.d,
            "M": self.M,
            "n_max": self.n_max,
            "convention": self.convention,
            "truncation_flag": self.truncation_flag,
            "breakdown_step": self.breakdown_step,
        }
        if self.alpha is not None:
            meta["alpha"] = [float(x) for x in self.alpha]
        if self.beta is not None:
            meta["beta"] = [float(x) for x in self.beta]
        return meta


def probe_footprint(pot: Potential) -> int:
    """Bytes held during a probe: three work fields plus the potential."""
    return 4 * pot.spec.field_bytes


def _check_budget(requested: int, what: str, budget: int | None) -> None:
    budget = memory_budget() if budget is None else budget
    if requested > budget:
        raise SizingError(what, requested, budget)


def run_lanczos(
    pot: Potential,
    source: Sequence[int],
    target: Sequence[int],
    n_max: int,
    on_vector: Callable[[LanczosState], None] | None = None,
    budget: int | None = None,
) -> DistanceSeries:
    """Core recurrence; ``on_vector`` sees the state each time a new v_k exists."""
    spec = pot.spec
    source, target = tuple(source), tuple(target)
    if len(source) != spec.d or len(target) != spec.d:
        raise ContractError(f"sites must have {spec.d} coordinates")
    if source == target:
        raise ContractError("source and target sites must differ")
    if n_max < 0:
        raise ContractError("n_max must be >= 0")
    _check_budget(probe_footprint(pot), "probe working set", budget)

    state = LanczosState(v_prev=zeros(spec), v_curr=delta_field(spec, source))
    work = zeros(spec)
    entry_at(state.v_curr, target)  # validates target
    values = np.empty(n_max + 1)
    truncated = False
    breakdown = None

    def record(k: int) -> None:
        ck = entry_at(state.v_curr, target)
        state.k = k
        state.proj_coeffs.append(ck)
        state.dist_sq -= ck * ck
        values[k] = state.distance
        if on_vector is not None:
            on_vector(state)

    record(0)
    beta_k = 0.0
    for k in range(n_max):
        truncated |= apply(pot, state.v_curr, work, truncation="record")
        if k > 0:
            axpy(-beta_k, state.v_prev, work)
        alpha_k = inner(work, state.v_curr)
        axpy(-alpha_k, state.v_curr, work)
        beta_next = norm(work)
        state.alpha.append(alpha_k)
        hv_norm = math.sqrt(beta_next**2 + alpha_k**2 + beta_k**2)
        if not beta_next > BREAKDOWN_RTOL * hv_norm:
            breakdown = k + 1
            values[k + 1 :] = values[k]
            log.info("Lanczos breakdown at step %d (beta=%.3e)", breakdown, beta_next)
            break
        state.beta.append(beta_next)
        scale(1.0 / beta_next, work)
        state.v_prev, state.v_curr, work = state.v_curr, work, state.v_prev
        beta_k = beta_next
        record(k + 1)

    if truncated:
        log.warning(
            "probe support reached the boundary of M=%d (source radius %d, n_max=%d)",
            spec.M, taxicab(source), n_max,
        )
    return DistanceSeries(
        c=pot.c,
        seed=pot.seed,
        n_max=n_max,
        values=values,
        truncation_flag=truncated,
        breakdown_step=breakdown,
        d=spec.d,
        M=spec.M,
        convention=pot.convention.value,
        alpha=np.array(state.alpha),
        beta=np.array(state.beta),
    )


def default_sites(d: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    return ORIGIN[:d], TARGET[:d]


def probe(
    pot: Potential,
    source: Sequence[int] | None = None,
    target: Sequence[int] | None = None,
    n_max: int = 200,
    budget: int | None = None,
) -> DistanceSeries:
    """Distance series of delta_target to the Krylov orbit of delta_source (default origin and (1,...,1))."""
    src, tgt = default_sites(pot.spec.d)
    return run_lanczos(pot, src if source is None else source, tgt if target is None else target, n_max, budget=budget)


def probe_with_basis(
    pot: Potential,
    source: Sequence[int] | None = None,
    target: Sequence[int] | None = None,
    n_max: int = 150,
    budget: int | None = None,
) -> tuple[DistanceSeries, np.ndarray]:
    """Same as ``probe`` but also returns K, whose columns are the Lanczos vectors v_0..v_k."""
    spec = pot.spec
    src, tgt = default_sites(spec.d)
    requested = probe_footprint(pot) + (n_max + 1) * spec.field_bytes
    _check_budget(requested, "stored Krylov basis", budget)
    rows = np.empty((n_max + 1, spec.total_sites))
    count = 0

    def keep(state: LanczosState) -> None:
        nonlocal count
        rows[state.k] = state.v_curr.values
        count = state.k + 1

    series = run_lanczos(
        pot, src if source is None else source, tgt if target is None else target, n_max,
        on_vector=keep, budget=budget,
    )
    return series, rows[:count].T


def ortho_diagnostic(K: np.ndarray) -> float:
    """Q = ||K^T K - I||_inf (maximum absolute row sum)."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[1] == 0:
        raise ContractError("basis must be a nonempty 2-D array of columns")
    G = K.T @ K
    G[np.diag_indices_from(G)] -= 1.0
    return float(np.abs(G).sum(axis=1).max())


def tridiagonal(series: DistanceSeries) -> np.ndarray:
    """The (k+1)x(k+1) Jacobi matrix built from the recorded alpha and beta."""
    alpha = np.asarray(series.alpha)
    beta = np.asarray(series.beta)
    m = min(alpha.size, beta.size + 1)
    T = np.diag(alpha[:m])
    off = beta[: m - 1]
    T += np.diag(off, 1) + np.diag(off, -1)
    return T


def krylov_vector(
    pot: Potential, n: int, kind: str = "lanczos", source: Sequence[int] | None = None
) -> Field:
    """The normalized n-th vector of the orbit of delta_source.

    ``kind="lanczos"`` gives the Lanczos vector v_n; ``kind="power"`` gives
    H^n delta_source / |H^n delta_source|.
    """
    spec = pot.spec
    src = default_sites(spec.d)[0] if source is None else tuple(source)
    if kind == "power":
        _check_budget(3 * spec.field_bytes, "power iteration working set", None)
        f = delta_field(spec, src)
        out = zeros(spec)
        for _ in range(n):
            apply(pot, f, out, truncation="record")
            scale(1.0 / norm(out), out)
            f, out = out, f
        return f
    if kind != "lanczos":
        raise ContractError(f"unknown vector kind {kind!r}")
    tgt = default_sites(spec.d)[1]
    if tgt == src:
        tgt = default_sites(spec.d)[0]
    captured = zeros(spec)

    def grab(state: LanczosState) -> None:
        if state.k == n:
            assign(state.v_curr, captured)

    series = run_lanczos(pot, src, tgt, n, on_vector=grab)
    if series.breakdown_step is not None and series.breakdown_step <= n:
        raise ContractError(f"Krylov space became invariant at step {series.breakdown_step} < {n}")
    return captured

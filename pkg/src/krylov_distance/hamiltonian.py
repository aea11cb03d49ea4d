"""Matrix-free H = -Laplacian + diagonal disorder on the truncated lattice.

(H f)(x) = 2d f(x) - sum_{|e|=1} f(x+e) + omega_x f(x), with f = 0 outside the
cube (zero-Dirichlet truncation).

Disorder draws come from numpy's Philox4x64 counter-based generator keyed by a
64-bit seed; one uniform double per site, consumed in layout order.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ContractError, DomainError, SizingError, TruncationError
from .lattice import Field, LatticeSpec, read_field, write_field

log = logging.getLogger(__name__)

DENSE_SITE_CAP = 5000


class Convention(str, enum.Enum):
    """Support of the on-site distribution: HALF is [-c/2, c/2], FULL is [-c, c]."""

    HALF = "half"
    FULL = "full"


def cell_seed(master_seed: int, c_index: int, r_index: int) -> int:
    """Independent 64-bit seed for sweep cell (c_index, r_index)."""
    ss = np.random.SeedSequence([int(master_seed), int(c_index), int(r_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class Potential:
    spec: LatticeSpec
    omega: np.ndarray
    c: float
    seed: int
    convention: Convention = Convention.HALF

    @property
    def grid(self) -> np.ndarray:
        return self.omega.reshape(self.spec.grid_shape)

    @property
    def bounds(self) -> tuple[float, float]:
        half = self.c / 2 if self.convention is Convention.HALF else self.c
        return (-half, half)


def sample_potential(
    spec: LatticeSpec, c: float, seed: int, convention: Convention | str = Convention.HALF
) -> Potential:
    """Draw i.i.d. uniform on-site energies; c = 0 gives the free operator."""
    c = float(c)
    if not c >= 0:
        raise DomainError(f"disorder strength must be >= 0, got {c}")
    convention = Convention(convention)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    omega = np.zeros(spec.total_sites)
    if c > 0:
        rng = np.random.Generator(np.random.Philox(seed))
        rng.random(out=omega)
        if convention is Convention.HALF:
            omega -= 0.5
        else:
            omega *= 2.0
            omega -= 1.0
        omega *= c
    omega.setflags(write=False)
    return Potential(spec, omega, c, seed, convention)


def zero_potential(spec: LatticeSpec) -> Potential:
    return sample_potential(spec, 0.0, 0)


def apply(pot: Potential, f: Field, out: Field, truncation: str = "raise") -> bool:
    """out <- H f. Returns True when the result was truncated by the cube boundary.

    ``truncation`` is ``"raise"`` (TruncationError) or ``"record"`` (warn once
    per call and return True).
    """
    if f is out or np.shares_memory(f.values, out.values):
        raise ContractError("apply: input and output fields alias")
    if f.spec != pot.spec or out.spec != pot.spec:
        raise ContractError("apply: lattice mismatch between potential and fields")
    spec = pot.spec
    truncated = f.active_radius + 1 > spec.M
    if truncated:
        if truncation == "raise":
            raise TruncationError(
                f"support radius {f.active_radius} reaches the boundary of M={spec.M}"
            )
        log.debug("apply truncated at radius %d (M=%d)", f.active_radius, spec.M)
    r_dst = min(f.active_radius + 1, spec.max_radius)
    _kernels.stencil_apply(f.grid, pot.grid, out.grid, float(2 * spec.d), r_dst, out.active_radius)
    out.active_radius = r_dst
    return truncated


def dense_matrix(pot: Potential) -> np.ndarray:
    """Explicit matrix of H, assembled site by site from the stencil definition."""
    spec = pot.spec
    n = spec.total_sites
    if n > DENSE_SITE_CAP:
        raise SizingError("dense matrix is limited to 5000 sites", n * n * 8, DENSE_SITE_CAP**2 * 8)
    A = np.zeros((n, n))
    for p in range(n):
        x = spec.site(p)
        A[p, p] = 2 * spec.d + pot.omega[p]
        for axis in range(spec.d):
            for step in (-1, 1):
                y = list(x)
                y[axis] += step
                if spec.contains(y):
                    A[p, spec.offset(y)] = -1.0
    return A


def write_potential(path: str | Path, pot: Potential) -> None:
    """Field-format binary of omega plus a JSON sidecar ``<path>.json``."""
    path = Path(path)
    write_field(path, Field(pot.spec, np.array(pot.omega), 0))
    sidecar = {"c": pot.c, "seed": pot.seed, "convention": pot.convention.value}
    path.with_name(path.name + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def read_potential(path: str | Path) -> Potential:
    path = Path(path)
    f = read_field(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    omega = f.values
    omega.setflags(write=False)
    return Potential(f.spec, omega, float(meta["c"]), int(meta["seed"]), Convention(meta["convention"]))

"""Taxicab-shell mass profile of a normalized lattice vector.

E(l) = sqrt(sum over sites with |x|_1 = l of f(x)^2), l = 0..l_max.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import AnalysisError, ContractError
from .hamiltonian import Potential
from .lanczos import krylov_vector
from .lattice import Field, norm

NORM_RTOL = 1e-10


class VectorKind(str, enum.Enum):
    LANCZOS_BASIS_VECTOR = "lanczos"
    NORMALIZED_POWER = "power"


@dataclass
class ShellProfile:
    n: int
    c: float
    seed: int
    values: np.ndarray
    source_vector_kind: VectorKind = VectorKind.LANCZOS_BASIS_VECTOR

    @property
    def l_max(self) -> int:
        return self.values.size - 1

    @property
    def peak(self) -> int:
        return int(np.argmax(self.values))

    def mean_radius(self) -> float:
        """Expected taxicab radius under the weights E(l)^2."""
        w = self.values**2
        return float(np.dot(np.arange(w.size), w) / w.sum())


def shell_profile(
    f: Field,
    n: int = 0,
    c: float = 0.0,
    seed: int = 0,
    kind: VectorKind | str = VectorKind.LANCZOS_BASIS_VECTOR,
    l_max: int | None = None,
) -> ShellProfile:
    nf = norm(f)
    if abs(nf - 1.0) > NORM_RTOL:
        raise ContractError(f"shell_profile needs a normalized vector, norm is {nf!r}")
    r = f.active_radius if l_max is None else max(int(l_max), f.active_radius)
    r = min(r, f.spec.max_radius)
    sums = _kernels.shell_square_sums(f.grid, r)
    values = np.sqrt(sums)
    if l_max is not None and l_max + 1 > values.size:
        values = np.pad(values, (0, l_max + 1 - values.size))
    return ShellProfile(n=n, c=c, seed=seed, values=values, source_vector_kind=VectorKind(kind))


def evolved_profile(pot: Potential, n: int, kind: VectorKind | str = VectorKind.LANCZOS_BASIS_VECTOR) -> ShellProfile:
    """Profile of the n-th normalized vector of the orbit of the origin delta."""
    kind = VectorKind(kind)
    f = krylov_vector(pot, n, kind=kind.value)
    return shell_profile(f, n=n, c=pot.c, seed=pot.seed, kind=kind, l_max=n)


@dataclass
class AveragedProfile:
    n: int
    c: float
    values: np.ndarray
    count: int
    seeds: list[int]


def averaged_profile(profiles: Sequence[ShellProfile]) -> AveragedProfile:
    """Pointwise mean of E(l) over realizations (mean of shell norms)."""
    if not profiles:
        raise AnalysisError("nothing to average")
    first = profiles[0]
    for p in profiles[1:]:
        if p.n != first.n or p.c != first.c or p.values.shape != first.values.shape:
            raise AnalysisError("profiles differ in n, c or l_max")
    values = np.mean(np.stack([p.values for p in profiles]), axis=0)
    return AveragedProfile(n=first.n, c=first.c, values=values, count=len(profiles), seeds=[p.seed for p in profiles])

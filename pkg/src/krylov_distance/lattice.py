"""Truncated cubic lattice {-M..M}^d, dense real fields on it, and l2 algebra.

Layout: row-major over coordinates (x_0, x_1, ..., x_{d-1}) with x_0 slowest,

    offset(x) = sum_k (x_k + M) * stride_k,   stride_{d-1} = 1,   stride_k = (2M+1)^(d-1-k).

Internally a field is also viewed as a 3-D array; a 2-D lattice uses the view
(1, 2M+1, 2M+1) so that the same diamond-restricted kernels serve both.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .errors import ContractError, DomainError, SizingError

BYTES_PER_VALUE = 8
MEMORY_BUDGET_ENV = "KRYLOV_DISTANCE_MEMORY_BUDGET"
DEFAULT_MEMORY_BUDGET = 4 * 1024**3

_FIELD_HEADER = struct.Struct("<ii8x")


def parse_bytes(text: str | int) -> int:
    """Parse ``"4G"``, ``"512M"``, ``"1e9"`` or a plain integer into bytes."""
    if isinstance(text, int):
        return text
    s = str(text).strip().upper().removesuffix("B").removesuffix("I")
    units = {"K": 1024, "M": 1024**2, "G": 1024**3, "T": 1024**4}
    if s and s[-1] in units:
        return int(float(s[:-1]) * units[s[-1]])
    return int(float(s))


def memory_budget() -> int:
    """Configured byte budget (environment override or 4 GiB)."""
    raw = os.environ.get(MEMORY_BUDGET_ENV)
    return parse_bytes(raw) if raw else DEFAULT_MEMORY_BUDGET


@dataclass(frozen=True)
class LatticeSpec:
    d: int
    M: int
    strides: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.d not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.d}")
        if self.M < 1:
            raise DomainError(f"half-width must be >= 1, got {self.M}")
        side = 2 * self.M + 1
        object.__setattr__(self, "strides", tuple(side ** (self.d - 1 - k) for k in range(self.d)))

    @property
    def side(self) -> int:
        return 2 * self.M + 1

    @property
    def total_sites(self) -> int:
        return self.side**self.d

    @property
    def field_bytes(self) -> int:
        return self.total_sites * BYTES_PER_VALUE

    @property
    def max_radius(self) -> int:
        """Largest taxicab radius present in the cube (its corners)."""
        return self.d * self.M

    @property
    def grid_shape(self) -> tuple[int, int, int]:
        if self.d == 2:
            return (1, self.side, self.side)
        return (self.side, self.side, self.side)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.d

    def contains(self, site: Sequence[int]) -> bool:
        return len(site) == self.d and all(abs(int(x)) <= self.M for x in site)

    def offset(self, site: Sequence[int]) -> int:
        if not self.contains(site):
            raise DomainError(f"site {tuple(site)} outside {{-{self.M}..{self.M}}}^{self.d}")
        return sum((int(x) + self.M) * s for x, s in zip(site, self.strides))

    def site(self, offset: int) -> tuple[int, ...]:
        if not 0 <= offset < self.total_sites:
            raise DomainError(f"offset {offset} outside [0, {self.total_sites})")
        coords = []
        for s in self.strides:
            q, offset = divmod(offset, s)
            coords.append(q - self.M)
        return tuple(coords)


def taxicab(site: Sequence[int]) -> int:
    return sum(abs(int(x)) for x in site)


def make_lattice(d: int, M: int, budget: int | None = None) -> LatticeSpec:
    """Build a lattice spec, refusing cubes whose single field exceeds the budget."""
    spec = LatticeSpec(d, M)
    budget = memory_budget() if budget is None else budget
    if spec.field_bytes > budget:
        raise SizingError(f"lattice d={d}, M={M} does not fit", spec.field_bytes, budget)
    return spec


class Field:
    """A real function on the lattice, zero outside taxicab radius ``active_radius``."""

    __slots__ = ("spec", "values", "active_radius")

    def __init__(self, spec: LatticeSpec, values: np.ndarray | None = None, active_radius: int | None = None):
        self.spec = spec
        if values is None:
            values = np.zeros(spec.total_sites)
            active_radius = 0 if active_radius is None else active_radius
        else:
            values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
            if values.size != spec.total_sites:
                raise ContractError(f"expected {spec.total_sites} values, got {values.size}")
            if active_radius is None:
                active_radius = support_radius(spec, values)
        self.values = values
        self.active_radius = min(int(active_radius), spec.max_radius)

    @property
    def grid(self) -> np.ndarray:
        return self.values.reshape(self.spec.grid_shape)

    def cube(self) -> np.ndarray:
        """Values shaped as a d-dimensional array indexed by x + M."""
        return self.values.reshape(self.spec.shape)

    def copy(self) -> Field:
        return Field(self.spec, self.values.copy(), self.active_radius)

    def __repr__(self) -> str:
        return f"Field(d={self.spec.d}, M={self.spec.M}, active_radius={self.active_radius})"


def taxicab_radii(spec: LatticeSpec) -> np.ndarray:
    """Taxicab radius of every site, in layout order (allocates one int array)."""
    axis = np.abs(np.arange(-spec.M, spec.M + 1))
    grids = np.meshgrid(*([axis] * spec.d), indexing="ij")
    return sum(grids).reshape(-1)


def support_radius(spec: LatticeSpec, values: np.ndarray) -> int:
    nz = np.flatnonzero(values)
    if nz.size == 0:
        return 0
    return int(taxicab_radii(spec)[nz].max())


def zeros(spec: LatticeSpec) -> Field:
    return Field(spec)


def delta_field(spec: LatticeSpec, site: Sequence[int]) -> Field:
    """Unit vector supported on a single site."""
    f = Field(spec)
    f.values[spec.offset(site)] = 1.0
    f.active_radius = taxicab(site)
    return f


def _check_pair(f: Field, g: Field) -> None:
    if f.spec != g.spec:
        raise ContractError(f"lattice mismatch: {f.spec} vs {g.spec}")


def inner(f: Field, g: Field) -> float:
    _check_pair(f, g)
    r = max(f.active_radius, g.active_radius)
    return float(_kernels.diamond_dot(f.grid, g.grid, r))


def norm(f: Field) -> float:
    return float(np.sqrt(_kernels.diamond_dot(f.grid, f.grid, f.active_radius)))


def axpy(alpha: float, f: Field, g: Field) -> None:
    """g <- g + alpha * f."""
    _check_pair(f, g)
    if f is g:
        raise ContractError("axpy operands must be distinct fields")
    _kernels.diamond_axpy(float(alpha), f.grid, g.grid, f.active_radius)
    g.active_radius = max(g.active_radius, f.active_radius)


def scale(alpha: float, f: Field) -> None:
    _kernels.diamond_scale(float(alpha), f.grid, f.active_radius)


def assign(src: Field, dst: Field) -> None:
    """dst <- src, touching only the two supports."""
    _check_pair(src, dst)
    if src is not dst:
        _kernels.diamond_copy(src.grid, dst.grid, src.active_radius, dst.active_radius)
        dst.active_radius = src.active_radius


def entry_at(f: Field, site: Sequence[int]) -> float:
    return float(f.values[f.spec.offset(site)])


def shell_sites(spec: LatticeSpec, l: int) -> Iterator[tuple[int, ...]]:
    """Sites of the cube with taxicab radius exactly ``l``, in ascending offset order."""
    if l < 0:
        raise DomainError(f"shell radius must be >= 0, got {l}")
    M = spec.M

    def rec(dims: int, rem: int) -> Iterator[tuple[int, ...]]:
        if dims == 1:
            if rem == 0:
                yield (0,)
            elif rem <= M:
                yield (-rem,)
                yield (rem,)
            return
        lim = min(rem, M)
        for x in range(-lim, lim + 1):
            for rest in rec(dims - 1, rem - abs(x)):
                yield (x, *rest)

    yield from rec(spec.d, l)


def shell_indices(spec: LatticeSpec, l: int) -> Iterator[int]:
    """Offsets of the sites on taxicab shell ``l``."""
    for s in shell_sites(spec, l):
        yield spec.offset(s)


def write_field(path: str | Path, f: Field) -> None:
    """Raw little-endian float64 values after a 16-byte header (d, M, 8 reserved bytes)."""
    with open(path, "wb") as fh:
        fh.write(_FIELD_HEADER.pack(f.spec.d, f.spec.M))
        fh.write(f.values.astype("<f8", copy=False).tobytes())


def read_field(path: str | Path) -> Field:
    with open(path, "rb") as fh:
        header = fh.read(_FIELD_HEADER.size)
        if len(header) != _FIELD_HEADER.size:
            raise ContractError(f"{path}: truncated header")
        d, M = _FIELD_HEADER.unpack(header)
        spec = LatticeSpec(d, M)
        values = np.fromfile(fh, dtype="<f8")
    if values.size != spec.total_sites:
        raise ContractError(f"{path}: expected {spec.total_sites} values, found {values.size}")
    return Field(spec, values.astype(np.float64))

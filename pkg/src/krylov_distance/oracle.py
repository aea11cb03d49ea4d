"""Dense reference computations for small lattices (test oracles).

The Krylov space is grown from the explicit matrix with full classical
Gram-Schmidt applied twice per vector, and the distance is the norm of the
explicit projection residual. Nothing here shares code with the streaming
recurrence except the lattice indexing.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ContractError, SizingError
from .hamiltonian import DENSE_SITE_CAP, Potential, dense_matrix
from .lanczos import DistanceSeries, default_sites

RANK_RTOL = 1e-10


def brute_force_distance(
    pot: Potential,
    source: Sequence[int] | None = None,
    target: Sequence[int] | None = None,
    n_max: int = 30,
) -> DistanceSeries:
    """dist(delta_target, span{H^j delta_source : j <= n}) for n = 0..n_max."""
    spec = pot.spec
    if spec.total_sites > DENSE_SITE_CAP:
        raise SizingError("brute-force oracle is limited to 5000 sites", spec.total_sites, DENSE_SITE_CAP)
    src, tgt = default_sites(spec.d)
    src = src if source is None else tuple(source)
    tgt = tgt if target is None else tuple(target)
    if src == tgt:
        raise ContractError("source and target sites must differ")
    A = dense_matrix(pot)
    n = spec.total_sites
    e_t = np.zeros(n)
    e_t[spec.offset(tgt)] = 1.0
    Q = np.zeros((n, n_max + 1))
    Q[spec.offset(src), 0] = 1.0
    rank = 1
    values = np.empty(n_max + 1)
    values[0] = np.linalg.norm(e_t - Q[:, :1] @ (Q[:, :1].T @ e_t))
    saturated_at = None
    for k in range(1, n_max + 1):
        if saturated_at is None:
            w = A @ Q[:, rank - 1]
            scale = np.linalg.norm(w)
            for _ in range(2):
                w -= Q[:, :rank] @ (Q[:, :rank].T @ w)
            nw = np.linalg.norm(w)
            if nw <= RANK_RTOL * scale:
                saturated_at = k
            else:
                Q[:, rank] = w / nw
                rank += 1
        B = Q[:, :rank]
        values[k] = np.linalg.norm(e_t - B @ (B.T @ e_t))
    return DistanceSeries(
        c=pot.c, seed=pot.seed, n_max=n_max, values=values,
        breakdown_step=saturated_at, d=spec.d, M=spec.M, convention=pot.convention.value,
    )


def krylov_rank(pot: Potential, n_max: int, source: Sequence[int] | None = None) -> list[int]:
    """Numerical rank of [delta, H delta, ..., H^k delta] (columns normalized) for each k."""
    spec = pot.spec
    A = dense_matrix(pot)
    src = default_sites(spec.d)[0] if source is None else tuple(source)
    v = np.zeros(spec.total_sites)
    v[spec.offset(src)] = 1.0
    cols = [v]
    ranks = [1]
    for _ in range(n_max):
        w = A @ cols[-1]
        cols.append(w / np.linalg.norm(w))
        s = np.linalg.svd(np.column_stack(cols), compute_uv=False)
        ranks.append(int((s > s[0] * 1e-12).sum()))
    return ranks


# Free operator in d = 3: the orbit of the origin delta is invariant under the
# 48 signed coordinate permutations, so every Krylov vector is determined by its
# values on the wedge x >= y >= z >= 0. Inner products weight each wedge point by
# the size of its orbit. Wedge points are packed as x(x+1)(x+2)/6 + y(y+1)/2 + z.

from numba import njit  # noqa: E402


@njit(cache=True, inline="always")
def _wedge_index(x, y, z):
    return x * (x + 1) * (x + 2) // 6 + y * (y + 1) // 2 + z


@njit(cache=True, inline="always")
def _canon(a, b, c):
    a, b, c = abs(a), abs(b), abs(c)
    if a < b:
        a, b = b, a
    if b < c:
        b, c = c, b
    if a < b:
        a, b = b, a
    return a, b, c


@njit(cache=True)
def _orbit_weights(R):
    w = np.zeros(_wedge_index(R + 1, 0, 0))
    for x in range(R + 1):
        for y in range(x + 1):
            for z in range(y + 1):
                if x == y and y == z:
                    perms = 1
                elif x == y or y == z:
                    perms = 3
                else:
                    perms = 6
                signs = (2 if x > 0 else 1) * (2 if y > 0 else 1) * (2 if z > 0 else 1)
                w[_wedge_index(x, y, z)] = perms * signs
    return w


@njit(cache=True)
def _wedge_apply(f, out, r):
    """out = -Laplacian f on wedge points with x + y + z <= r (f is zero beyond r - 1)."""
    for x in range(r + 1):
        for y in range(min(x, r - x) + 1):
            for z in range(min(y, r - x - y) + 1):
                v = 6.0 * f[_wedge_index(x, y, z)]
                for s in (-1, 1):
                    a, b, c = _canon(x + s, y, z)
                    if a + b + c < r:
                        v -= f[_wedge_index(a, b, c)]
                    a, b, c = _canon(x, y + s, z)
                    if a + b + c < r:
                        v -= f[_wedge_index(a, b, c)]
                    a, b, c = _canon(x, y, z + s)
                    if a + b + c < r:
                        v -= f[_wedge_index(a, b, c)]
                out[_wedge_index(x, y, z)] = v


@njit(cache=True)
def _wedge_dot(f, g, w, r):
    s = 0.0
    for x in range(r + 1):
        for y in range(min(x, r - x) + 1):
            for z in range(min(y, r - x - y) + 1):
                i = _wedge_index(x, y, z)
                s += w[i] * f[i] * g[i]
    return s


def free_symmetric_distance(n_max: int) -> np.ndarray:
    """D^0..D^{n_max} for c = 0, d = 3, source origin, target (1,1,1), on the infinite lattice.

    The same three-term recurrence as the streaming probe, but run on the
    48-fold reduced wedge with orbit-weighted inner products, so it shares no
    storage, stencil or truncation logic with the lattice code.
    """
    R = n_max + 1
    w = _orbit_weights(R)
    size = w.size
    v_prev = np.zeros(size)
    v = np.zeros(size)
    v[_wedge_index(0, 0, 0)] = 1.0
    work = np.zeros(size)
    t = _wedge_index(1, 1, 1)
    values = np.empty(n_max + 1)
    dist_sq = 1.0 - v[t] ** 2
    values[0] = np.sqrt(max(dist_sq, 0.0))
    beta = 0.0
    for k in range(n_max):
        r = k + 1
        # every wedge point within taxicab radius r has x <= r, a prefix of the packing
        end = _wedge_index(r + 1, 0, 0)
        wk, vk, vp = work[:end], v[:end], v_prev[:end]
        wk[:] = 0.0
        _wedge_apply(v, work, r)
        if k > 0:
            wk -= beta * vp
        alpha = _wedge_dot(work, v, w, r)
        wk -= alpha * vk
        beta = np.sqrt(_wedge_dot(work, work, w, r))
        wk /= beta
        v_prev, v, work = v, work, v_prev
        dist_sq -= v[t] ** 2
        values[k + 1] = np.sqrt(max(dist_sq, 0.0))
    return values

"""Numba kernels restricted to a clipped taxicab diamond.

Every kernel takes 3-D views of shape (2*M0+1, 2*M1+1, 2*M2+1); a 2-D lattice
is passed as a (1, n, n) view, so M0 = 0 and axis 0 contributes no neighbors.
Only sites with |i| + |j| + |k| <= r are visited. Reductions accumulate one
partial sum per axis-0 slab and then add the slabs serially, so results do not
depend on the numba thread count.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, inline="always")
def _row_limit(r, i, j, m2):
    z = r - abs(i) - abs(j)
    if z > m2:
        z = m2
    return z


@njit(parallel=True, cache=True)
def stencil_apply(f, omega, out, diag, r_dst, r_clear):
    """out = (diag + omega) * f - sum of axis neighbors, on the diamond of radius r_dst.

    Sites of ``out`` with radius in (r_dst, r_clear] are zeroed so that stale
    content from a previous, larger support is removed.
    """
    n0, n1, n2 = f.shape
    m0 = (n0 - 1) // 2
    m1 = (n1 - 1) // 2
    m2 = (n2 - 1) // 2
    r = max(r_dst, r_clear)
    lim0 = min(r, m0)
    for ii in prange(2 * lim0 + 1):
        i = ii - lim0
        a = i + m0
        ri = r - abs(i)
        lim1 = min(ri, m1)
        for j in range(-lim1, lim1 + 1):
            b = j + m1
            zc = _row_limit(r, i, j, m2)
            zd = _row_limit(r_dst, i, j, m2)
            if zd < 0:
                for k in range(-zc, zc + 1):
                    out[a, b, k + m2] = 0.0
                continue
            for k in range(-zc, -zd):
                out[a, b, k + m2] = 0.0
            for k in range(zd + 1, zc + 1):
                out[a, b, k + m2] = 0.0
            for k in range(-zd, zd + 1):
                c = k + m2
                v = (diag + omega[a, b, c]) * f[a, b, c]
                if a > 0:
                    v -= f[a - 1, b, c]
                if a < n0 - 1:
                    v -= f[a + 1, b, c]
                if b > 0:
                    v -= f[a, b - 1, c]
                if b < n1 - 1:
                    v -= f[a, b + 1, c]
                if c > 0:
                    v -= f[a, b, c - 1]
                if c < n2 - 1:
                    v -= f[a, b, c + 1]
                out[a, b, c] = v


@njit(parallel=True, cache=True)
def diamond_dot(f, g, r):
    n0, n1, n2 = f.shape
    m0 = (n0 - 1) // 2
    m1 = (n1 - 1) // 2
    m2 = (n2 - 1) // 2
    lim0 = min(r, m0)
    partial = np.zeros(2 * lim0 + 1)
    for ii in prange(2 * lim0 + 1):
        i = ii - lim0
        a = i + m0
        lim1 = min(r - abs(i), m1)
        s = 0.0
        for j in range(-lim1, lim1 + 1):
            b = j + m1
            z = _row_limit(r, i, j, m2)
            for k in range(-z, z + 1):
                s += f[a, b, k + m2] * g[a, b, k + m2]
        partial[ii] = s
    total = 0.0
    for ii in range(2 * lim0 + 1):
        total += partial[ii]
    return total


@njit(parallel=True, cache=True)
def diamond_axpy(alpha, f, g, r):
    """g += alpha * f on the diamond of radius r."""
    n0, n1, n2 = f.shape
    m0 = (n0 - 1) // 2
    m1 = (n1 - 1) // 2
    m2 = (n2 - 1) // 2
    lim0 = min(r, m0)
    for ii in prange(2 * lim0 + 1):
        i = ii - lim0
        a = i + m0
        lim1 = min(r - abs(i), m1)
        for j in range(-lim1, lim1 + 1):
            b = j + m1
            z = _row_limit(r, i, j, m2)
            for k in range(-z, z + 1):
                g[a, b, k + m2] += alpha * f[a, b, k + m2]


@njit(parallel=True, cache=True)
def diamond_scale(alpha, f, r):
    n0, n1, n2 = f.shape
    m0 = (n0 - 1) // 2
    m1 = (n1 - 1) // 2
    m2 = (n2 - 1) // 2
    lim0 = min(r, m0)
    for ii in prange(2 * lim0 + 1):
        i = ii - lim0
        a = i + m0
        lim1 = min(r - abs(i), m1)
        for j in range(-lim1, lim1 + 1):
            b = j + m1
            z = _row_limit(r, i, j, m2)
            for k in range(-z, z + 1):
                f[a, b, k + m2] *= alpha


@njit(parallel=True, cache=True)
def diamond_copy(src, dst, r_src, r_clear):
    """dst = src on radius r_src; zero dst on the fringe up to r_clear."""
    n0, n1, n2 = src.shape
    m0 = (n0 - 1) // 2
    m1 = (n1 - 1) // 2
    m2 = (n2 - 1) // 2
    r = max(r_src, r_clear)
    lim0 = min(r, m0)
    for ii in prange(2 * lim0 + 1):
        i = ii - lim0
        a = i + m0
        lim1 = min(r - abs(i), m1)
        for j in range(-lim1, lim1 + 1):
            b = j + m1
            zc = _row_limit(r, i, j, m2)
            zs = _row_limit(r_src, i, j, m2)
            for k in range(-zc, zc + 1):
                if abs(k) <= zs:
                    dst[a, b, k + m2] = src[a, b, k + m2]
                else:
                    dst[a, b, k + m2] = 0.0


@njit(parallel=True, cache=True)
def shell_square_sums(f, r):
    """Sum of squared entries on each taxicab shell l = 0..r."""
    n0, n1, n2 = f.shape
    m0 = (n0 - 1) // 2
    m1 = (n1 - 1) // 2
    m2 = (n2 - 1) // 2
    lim0 = min(r, m0)
    partial = np.zeros((2 * lim0 + 1, r + 1))
    for ii in prange(2 * lim0 + 1):
        i = ii - lim0
        a = i + m0
        lim1 = min(r - abs(i), m1)
        for j in range(-lim1, lim1 + 1):
            b = j + m1
            z = _row_limit(r, i, j, m2)
            base = abs(i) + abs(j)
            for k in range(-z, z + 1):
                v = f[a, b, k + m2]
                partial[ii, base + abs(k)] += v * v
    out = np.zeros(r + 1)
    for ii in range(2 * lim0 + 1):
        for l in range(r + 1):
            out[l] += partial[ii, l]
    return out

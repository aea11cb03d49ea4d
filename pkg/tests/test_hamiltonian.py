import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from krylov_distance.errors import ContractError, DomainError, SizingError, TruncationError
from krylov_distance.hamiltonian import (
    Convention,
    apply,
    cell_seed,
    dense_matrix,
    read_potential,
    sample_potential,
    write_potential,
    zero_potential,
)
from krylov_distance.lattice import Field, LatticeSpec, delta_field, entry_at, inner, shell_indices

from helpers import random_field


def kron_laplacian(d, M):
    """-Laplacian with zero-Dirichlet truncation as a Kronecker sum of 1-D second differences."""
    n = 2 * M + 1
    one = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    eye = sp.identity(n)
    total = None
    for axis in range(d):
        factors = [one if k == axis else eye for k in range(d)]
        term = factors[0]
        for f in factors[1:]:
            term = sp.kron(term, f)
        total = term if total is None else total + term
    return total.toarray()


@pytest.mark.parametrize(
    "c, convention, lo, hi", [(1.0, "half", -0.5, 0.5), (3.0, "half", -1.5, 1.5), (3.0, "full", -3.0, 3.0)]
)
def test_potential_statistics(c, convention, lo, hi):
    pot = sample_potential(LatticeSpec(3, 50), c, seed=99, convention=convention)
    w = pot.omega
    n = w.size
    assert n > 10**6
    assert pot.bounds == (lo, hi)
    assert w.min() >= lo and w.max() < hi
    h = hi
    mean_se = np.sqrt(h * h / 3 / n)
    var_exact = h * h / 3
    var_se = np.sqrt(4 * h**4 / 45 / n)
    assert abs(w.mean()) < 3 * mean_se
    assert abs(w.var() - var_exact) < 3 * var_se


def test_potential_determinism_and_independence():
    spec = LatticeSpec(3, 4)
    a = sample_potential(spec, 2.0, 17)
    b = sample_potential(spec, 2.0, 17)
    c = sample_potential(spec, 2.0, 18)
    np.testing.assert_array_equal(a.omega, b.omega)
    assert not np.array_equal(a.omega, c.omega)
    assert not a.omega.flags.writeable


def test_zero_disorder_is_free():
    pot = sample_potential(LatticeSpec(2, 3), 0.0, 5)
    assert not pot.omega.any()
    assert not zero_potential(LatticeSpec(3, 2)).omega.any()


def test_negative_disorder_rejected():
    with pytest.raises(DomainError):
        sample_potential(LatticeSpec(3, 2), -1.0, 0)
    with pytest.raises(ValueError):
        sample_potential(LatticeSpec(3, 2), 1.0, 0, convention="third")


def test_cell_seeds_distinct_and_stable():
    seeds = {cell_seed(7, ci, ri) for ci in range(5) for ri in range(20)}
    assert len(seeds) == 100
    assert cell_seed(7, 2, 3) == cell_seed(7, 2, 3)
    assert cell_seed(7, 2, 3) != cell_seed(8, 2, 3)


def test_apply_on_delta_examples():
    spec = LatticeSpec(3, 3)
    omega = np.zeros(spec.total_sites)
    omega[spec.offset((0, 0, 0))] = 0.7
    pot = sample_potential(spec, 0.0, 0)
    object.__setattr__(pot, "omega", omega)
    out = Field(spec)
    truncated = apply(pot, delta_field(spec, (0, 0, 0)), out)
    assert not truncated
    assert entry_at(out, (0, 0, 0)) == pytest.approx(6.7)
    for e in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]:
        assert entry_at(out, e) == -1.0
    assert np.count_nonzero(out.values) == 7
    assert out.active_radius == 1

    spec2 = LatticeSpec(2, 2)
    out2 = Field(spec2)
    apply(zero_potential(spec2), delta_field(spec2, (0, 0)), out2)
    assert entry_at(out2, (0, 0)) == 4.0
    assert np.count_nonzero(out2.values) == 5


@pytest.mark.parametrize("d, M", [(2, 3), (3, 2)])
def test_dense_matrix_matches_kronecker_sum(d, M):
    pot = sample_potential(LatticeSpec(d, M), 1.3, 4)
    expected = kron_laplacian(d, M) + np.diag(pot.omega)
    np.testing.assert_array_equal(dense_matrix(pot), expected)


@given(st.sampled_from([2, 3]), st.integers(1, 4), st.floats(0, 5), st.integers(0, 2**63), st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_apply_agrees_with_dense_and_is_symmetric(d, M, c, seed, fseed):
    spec = LatticeSpec(d, M)
    pot = sample_potential(spec, c, seed)
    rng = np.random.default_rng(fseed)
    A = dense_matrix(pot)
    f = random_field(spec, spec.max_radius, rng)
    g = random_field(spec, spec.max_radius, rng)
    hf, hg = Field(spec), Field(spec)
    apply(pot, f, hf, truncation="record")
    apply(pot, g, hg, truncation="record")
    np.testing.assert_allclose(hf.values, A @ f.values, rtol=1e-13, atol=1e-12)
    assert inner(hf, g) == pytest.approx(inner(f, hg), rel=1e-12, abs=1e-10)
    # Rayleigh quotient lies in the spectral range of -Laplacian + omega
    lo, hi = pot.bounds
    q = inner(hf, f) / inner(f, f)
    assert lo - 1e-12 <= q <= 4 * d + hi + 1e-12


@given(st.integers(0, 3), st.integers(0, 2**32))
@settings(max_examples=20, deadline=None)
def test_apply_is_local(radius, fseed):
    spec = LatticeSpec(3, 5)
    pot = sample_potential(spec, 2.0, 3)
    f = random_field(spec, radius, np.random.default_rng(fseed))
    out = random_field(spec, spec.max_radius, np.random.default_rng(fseed + 1))
    out.active_radius = spec.max_radius
    apply(pot, f, out)
    assert out.active_radius == radius + 1
    outside = [p for l in range(radius + 2, spec.max_radius + 1) for p in shell_indices(spec, l)]
    assert not out.values[outside].any()


def test_apply_aliasing_rejected():
    spec = LatticeSpec(3, 2)
    pot = zero_potential(spec)
    f = delta_field(spec, (0, 0, 0))
    with pytest.raises(ContractError):
        apply(pot, f, f)
    view = Field.__new__(Field)
    view.spec, view.values, view.active_radius = spec, f.values, 0
    with pytest.raises(ContractError):
        apply(pot, f, view)
    with pytest.raises(ContractError):
        apply(pot, f, Field(LatticeSpec(3, 3)))


def test_truncation_raise_and_record():
    spec = LatticeSpec(3, 2)
    pot = zero_potential(spec)
    f = delta_field(spec, (1, 1, 0))
    out = Field(spec)
    with pytest.raises(TruncationError):
        apply(pot, f, out)
    assert apply(pot, f, out, truncation="record") is True
    np.testing.assert_allclose(out.values, dense_matrix(pot) @ f.values)
    assert apply(pot, delta_field(spec, (1, 0, 0)), Field(spec)) is False


def test_dense_matrix_size_cap():
    with pytest.raises(SizingError):
        dense_matrix(zero_potential(LatticeSpec(3, 9)))


def test_potential_round_trip(tmp_path):
    pot = sample_potential(LatticeSpec(3, 3), 2.5, 11, Convention.FULL)
    path = tmp_path / "omega.bin"
    write_potential(path, pot)
    back = read_potential(path)
    assert (back.c, back.seed, back.convention) == (2.5, 11, Convention.FULL)
    np.testing.assert_array_equal(back.omega, pot.omega)

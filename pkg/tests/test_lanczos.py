import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krylov_distance.errors import AnalysisError, ContractError, SizingError
from krylov_distance.hamiltonian import dense_matrix, sample_potential, zero_potential
from krylov_distance.io import read_series, write_series
from krylov_distance.lanczos import (
    DistanceSeries,
    krylov_vector,
    ortho_diagnostic,
    probe,
    probe_with_basis,
    run_lanczos,
    tridiagonal,
)
from krylov_distance.lattice import LatticeSpec, norm
from krylov_distance.oracle import brute_force_distance, free_symmetric_distance, krylov_rank


def test_free_first_steps():
    series = probe(zero_potential(LatticeSpec(3, 6)), n_max=5)
    assert series.values[0] == 1.0
    assert series.values[1] == 1.0
    assert series.values[2] == 1.0
    assert series.values[3] < 1.0
    assert series.alpha[0] == 6.0
    assert series.beta[0] == pytest.approx(math.sqrt(6), rel=1e-15)
    assert not series.truncation_flag
    assert series.breakdown_step is None


@given(st.floats(0.5, 4), st.integers(0, 2**63), st.sampled_from(["half", "full"]))
@settings(max_examples=10, deadline=None)
def test_probe_matches_dense_oracle(c, seed, convention):
    pot = sample_potential(LatticeSpec(3, 3), c, seed, convention)
    ours = probe(pot, n_max=25)
    ref = brute_force_distance(pot, n_max=25)
    np.testing.assert_allclose(ours.values, ref.values, rtol=0, atol=1e-10)


def test_probe_matches_dense_oracle_in_two_dimensions():
    pot = sample_potential(LatticeSpec(2, 8), 1.5, 42)
    ours = probe(pot, n_max=40)
    ref = brute_force_distance(pot, n_max=40)
    np.testing.assert_allclose(ours.values, ref.values, rtol=0, atol=1e-10)


def test_other_source_and_target():
    pot = sample_potential(LatticeSpec(3, 3), 2.0, 5)
    ours = probe(pot, source=(1, 0, 0), target=(0, 0, -2), n_max=20)
    ref = brute_force_distance(pot, source=(1, 0, 0), target=(0, 0, -2), n_max=20)
    np.testing.assert_allclose(ours.values, ref.values, rtol=0, atol=1e-10)


def test_free_small_cube_exhaustion_is_just_above_breakdown_tolerance():
    # Without disorder the orbit of the origin spans only the symmetric vectors,
    # 16 of them on {-3..3}^3. The residual that should vanish at step 16 is left
    # at a few 1e-12 relative to |H v| by the boundary-truncated recurrence, so the
    # 1e-12 breakdown test does not fire and later distances are not trustworthy.
    pot = zero_potential(LatticeSpec(3, 3))
    series = probe(pot, n_max=25)
    ref = brute_force_distance(pot, n_max=25)
    assert ref.breakdown_step == 16
    assert series.truncation_flag
    np.testing.assert_allclose(series.values[:16], ref.values[:16], atol=1e-10)
    assert 1e-12 * 6 < series.beta[15] < 1e-10 * 6


def test_free_series_matches_symmetric_oracle():
    series = probe(zero_potential(LatticeSpec(3, 61)), n_max=60)
    np.testing.assert_allclose(series.values, free_symmetric_distance(60), rtol=0, atol=1e-13)


def test_basis_is_orthonormal_and_tridiagonalizes():
    pot = sample_potential(LatticeSpec(3, 5), 2.0, 3)
    series, K = probe_with_basis(pot, n_max=40)
    assert K.shape == (pot.spec.total_sites, 41)
    assert ortho_diagnostic(K) <= 1e-10
    np.testing.assert_allclose(np.linalg.norm(K, axis=0), 1.0, atol=1e-12)
    T = tridiagonal(series)
    Kn = K[:, :-1]
    np.testing.assert_allclose(Kn.T @ dense_matrix(pot) @ Kn, T, rtol=0, atol=1e-8)


def test_ortho_diagnostic_definition():
    K = np.eye(4)[:, :3]
    assert ortho_diagnostic(K) == 0.0
    K[:, 2] = K[:, 1]
    # Gram matrix has a 1 off the diagonal in rows 1 and 2
    assert ortho_diagnostic(K) == 1.0
    with pytest.raises(ContractError):
        ortho_diagnostic(np.zeros((3, 0)))


@given(st.floats(0, 5), st.integers(0, 2**63))
@settings(max_examples=15, deadline=None)
def test_series_is_nonincreasing_and_in_unit_interval(c, seed):
    series = probe(sample_potential(LatticeSpec(3, 9), c, seed), n_max=8)
    v = series.values
    assert np.all(np.diff(v) <= 1e-15)
    assert np.all((v >= 0) & (v <= 1))


def test_free_parity_pattern():
    series = probe(zero_potential(LatticeSpec(3, 31)), n_max=30)
    v = series.values
    for k in range(2, 31, 2):
        assert v[k] == v[k - 1]
    for k in range(3, 31, 2):
        assert v[k] < v[k - 1]
    np.testing.assert_allclose(series.alpha, 6.0, rtol=0, atol=1e-13)


def test_breakdown_pads_with_last_value():
    # a tiny cube: the Krylov space is exhausted well before n_max
    pot = sample_potential(LatticeSpec(2, 1), 0.0, 0)
    series = probe(pot, n_max=20)
    ranks = krylov_rank(pot, 20)
    assert series.breakdown_step is not None
    assert series.breakdown_step == max(ranks)
    k = series.breakdown_step
    assert np.all(series.values[k:] == series.values[k - 1])
    ref = brute_force_distance(pot, n_max=20)
    np.testing.assert_allclose(series.values, ref.values, atol=1e-10)
    assert series.truncation_flag


def test_truncation_flag_and_clean_run():
    assert probe(zero_potential(LatticeSpec(3, 5)), n_max=10).truncation_flag
    assert not probe(zero_potential(LatticeSpec(3, 11)), n_max=10).truncation_flag


def test_contract_errors():
    pot = zero_potential(LatticeSpec(3, 3))
    with pytest.raises(ContractError):
        probe(pot, source=(0, 0, 0), target=(0, 0, 0), n_max=3)
    with pytest.raises(ContractError):
        probe(pot, source=(0, 0), n_max=3)
    with pytest.raises(ContractError):
        run_lanczos(pot, (0, 0, 0), (1, 1, 1), -1)
    with pytest.raises(ContractError):
        DistanceSeries(c=0, seed=0, n_max=3, values=[1.0, 1.0])


def test_budget_errors():
    pot = zero_potential(LatticeSpec(3, 10))
    need = 4 * pot.spec.field_bytes
    probe(pot, n_max=5, budget=need)
    with pytest.raises(SizingError):
        probe(pot, n_max=5, budget=need - 1)
    with pytest.raises(SizingError):
        probe_with_basis(pot, n_max=5, budget=need + 5 * pot.spec.field_bytes)


def test_krylov_vector_kinds():
    pot = sample_potential(LatticeSpec(3, 6), 1.0, 2)
    v = krylov_vector(pot, 4)
    _, K = probe_with_basis(pot, n_max=4)
    np.testing.assert_allclose(v.values, K[:, 4], atol=1e-14)
    w = krylov_vector(pot, 4, kind="power")
    x = np.zeros(pot.spec.total_sites)
    x[pot.spec.offset((0, 0, 0))] = 1.0
    hx = np.linalg.matrix_power(dense_matrix(pot), 4) @ x
    np.testing.assert_allclose(w.values, hx / np.linalg.norm(hx), atol=1e-13)
    assert norm(w) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ContractError):
        krylov_vector(pot, 2, kind="chebyshev")


def test_series_csv_round_trip(tmp_path):
    series = probe(sample_potential(LatticeSpec(3, 6), 1.0, 8), n_max=12)
    path = tmp_path / "series.csv"
    write_series(path, series)
    back = read_series(path)
    np.testing.assert_array_equal(back.values, series.values)
    np.testing.assert_array_equal(back.alpha, series.alpha)
    np.testing.assert_array_equal(back.beta, series.beta)
    assert (back.c, back.seed, back.d, back.M, back.convention) == (1.0, 8, 3, 6, "half")
    assert path.read_text().splitlines()[0] == "n,distance"


@pytest.mark.parametrize(
    "text",
    ["", "n,dist\n0,1\n", "n,distance\n0,1\n2,0.5\n", "n,distance\n0,abc\n", "n,distance\n0,nan\n",
     "n,distance\n0,1,2\n", "n,distance\n"],
)
def test_malformed_series_csv(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(AnalysisError):
        read_series(path)


def test_missing_series_file(tmp_path):
    with pytest.raises(AnalysisError):
        read_series(tmp_path / "nope.csv")

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krylov_distance.errors import ContractError, DomainError, SizingError
from krylov_distance.lattice import (
    Field,
    LatticeSpec,
    assign,
    axpy,
    delta_field,
    entry_at,
    inner,
    make_lattice,
    norm,
    parse_bytes,
    read_field,
    scale,
    shell_indices,
    shell_sites,
    support_radius,
    taxicab,
    write_field,
)

from helpers import random_field

specs = st.builds(LatticeSpec, st.sampled_from([2, 3]), st.integers(1, 6))


def test_offset_examples():
    spec = LatticeSpec(3, 2)
    assert spec.side == 5
    assert spec.strides == (25, 5, 1)
    assert spec.offset((-2, -2, -2)) == 0
    assert spec.offset((0, 0, 0)) == 62
    assert spec.offset((2, 2, 2)) == 124
    assert spec.site(62) == (0, 0, 0)
    assert LatticeSpec(2, 1).offset((1, -1)) == 6


@given(specs, st.data())
def test_offset_site_bijection(spec, data):
    p = data.draw(st.integers(0, spec.total_sites - 1))
    assert spec.offset(spec.site(p)) == p
    x = tuple(data.draw(st.integers(-spec.M, spec.M)) for _ in range(spec.d))
    assert spec.site(spec.offset(x)) == x


@given(specs, st.data())
def test_unit_step_moves_by_stride(spec, data):
    axis = data.draw(st.integers(0, spec.d - 1))
    x = [data.draw(st.integers(-spec.M, spec.M - 1)) for _ in range(spec.d)]
    y = list(x)
    y[axis] += 1
    assert spec.offset(y) - spec.offset(x) == spec.strides[axis]


def test_offsets_cover_cube_exactly_once():
    spec = LatticeSpec(2, 3)
    seen = sorted(spec.offset(x) for x in itertools.product(range(-3, 4), repeat=2))
    assert seen == list(range(spec.total_sites))


def test_outside_site_and_offset_rejected():
    spec = LatticeSpec(3, 2)
    with pytest.raises(DomainError):
        spec.offset((3, 0, 0))
    with pytest.raises(DomainError):
        spec.offset((0, 0))
    with pytest.raises(DomainError):
        spec.site(spec.total_sites)
    with pytest.raises(DomainError):
        LatticeSpec(4, 2)
    with pytest.raises(DomainError):
        LatticeSpec(3, 0)


def test_shell_of_radius_three_has_38_sites():
    spec = LatticeSpec(3, 5)
    brute = [x for x in itertools.product(range(-5, 6), repeat=3) if sum(map(abs, x)) == 3]
    sites = list(shell_sites(spec, 3))
    assert len(sites) == 38
    assert sorted(sites) == sorted(brute)


@given(specs)
@settings(max_examples=30)
def test_shells_partition_the_cube(spec):
    seen = []
    for l in range(spec.max_radius + 1):
        idx = list(shell_indices(spec, l))
        assert idx == sorted(idx)
        assert all(taxicab(spec.site(p)) == l for p in idx)
        seen += idx
    assert sorted(seen) == list(range(spec.total_sites))
    assert list(shell_sites(spec, spec.max_radius + 1)) == []


def test_truncated_shell_is_clipped():
    spec = LatticeSpec(2, 1)
    assert sorted(shell_sites(spec, 2)) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]


def test_delta_and_entry():
    spec = LatticeSpec(3, 2)
    f = delta_field(spec, (1, 1, 1))
    assert f.active_radius == 3
    assert entry_at(f, (1, 1, 1)) == 1.0
    assert norm(f) == 1.0
    assert f.values.sum() == 1.0


@given(specs, st.integers(0, 2**32 - 1), st.data())
@settings(max_examples=40, deadline=None)
def test_diamond_algebra_matches_dense(spec, seed, data):
    rng = np.random.default_rng(seed)
    rf = data.draw(st.integers(0, spec.max_radius))
    rg = data.draw(st.integers(0, spec.max_radius))
    f, g = random_field(spec, rf, rng), random_field(spec, rg, rng)
    # the declared radius bounds the real support
    assert support_radius(spec, f.values) <= f.active_radius
    assert inner(f, g) == pytest.approx(float(f.values @ g.values), rel=1e-12, abs=1e-12)
    assert norm(f) == pytest.approx(float(np.linalg.norm(f.values)), rel=1e-12)
    expected = g.values + 0.7 * f.values
    axpy(0.7, f, g)
    np.testing.assert_allclose(g.values, expected, rtol=1e-14, atol=1e-14)
    assert g.active_radius == max(rf, rg)
    assert support_radius(spec, g.values) <= g.active_radius
    scale(-2.0, g)
    np.testing.assert_allclose(g.values, -2.0 * expected, rtol=1e-14, atol=1e-14)


def test_assign_clears_old_support():
    spec = LatticeSpec(3, 3)
    rng = np.random.default_rng(1)
    src = random_field(spec, 1, rng)
    dst = random_field(spec, 5, rng)
    assign(src, dst)
    np.testing.assert_array_equal(dst.values, src.values)
    assert dst.active_radius == 1


def test_pair_checks():
    a, b = Field(LatticeSpec(3, 2)), Field(LatticeSpec(3, 3))
    with pytest.raises(ContractError):
        inner(a, b)
    with pytest.raises(ContractError):
        axpy(1.0, a, a)
    with pytest.raises(ContractError):
        Field(LatticeSpec(3, 2), np.zeros(7))


def test_field_round_trip(tmp_path):
    spec = LatticeSpec(2, 4)
    f = random_field(spec, 3, np.random.default_rng(7))
    path = tmp_path / "f.bin"
    write_field(path, f)
    assert path.stat().st_size == 16 + 8 * spec.total_sites
    g = read_field(path)
    assert g.spec == spec
    np.testing.assert_array_equal(g.values, f.values)
    assert g.active_radius == support_radius(spec, f.values)


def test_field_read_rejects_short_file(tmp_path):
    path = tmp_path / "f.bin"
    write_field(path, Field(LatticeSpec(3, 2)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ContractError):
        read_field(path)
    path.write_bytes(b"\x00" * 4)
    with pytest.raises(ContractError):
        read_field(path)


def test_make_lattice_respects_budget(monkeypatch):
    spec = make_lattice(3, 10, budget=10**6)
    assert spec.field_bytes == 21**3 * 8
    with pytest.raises(SizingError) as info:
        make_lattice(3, 100, budget=10**6)
    assert info.value.requested_bytes == 201**3 * 8
    assert info.value.budget_bytes == 10**6
    monkeypatch.setenv("KRYLOV_DISTANCE_MEMORY_BUDGET", "1M")
    with pytest.raises(SizingError):
        make_lattice(3, 40)


@pytest.mark.parametrize(
    "text, value",
    [("4G", 4 * 1024**3), ("512M", 512 * 1024**2), ("1e9", 10**9), ("2GiB", 2 * 1024**3), (123, 123)],
)
def test_parse_bytes(text, value):
    assert parse_bytes(text) == value

import cmath
import functools
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlaw.measures import DomainError, Sector, Spectrum, region_area, region_contains
from circlaw.sampler import sample_spectrum
from circlaw.spiral import (
    Order,
    build_reference_measure,
    choose_m,
    lattice,
    lattice_index,
    max_sector_displacement,
    predicted_location,
    quantization_error_bound,
    rings,
    sector_displacements,
    sort_spectrum_spiral,
    spiral_argsort,
    spiral_compare,
    spiral_coupling_cost,
    spiral_key,
)
from circlaw.transport import wasserstein_assignment

points = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)


def test_compare_examples():
    assert spiral_compare(0, 0.3j, 4) == Order.LESS
    assert spiral_compare(0.3j, 0, 4) == Order.GREATER
    assert spiral_compare(0.4 * cmath.exp(1j), 0.6 * cmath.exp(0.5j), 4) == Order.LESS
    assert spiral_compare(0.1 * cmath.exp(1j * math.pi / 3), 0.1 * cmath.exp(1j * math.pi / 2), 4) == Order.LESS
    assert spiral_compare(0.2j, 0.2j, 4) == Order.EQUAL
    # equal argument: larger modulus first
    assert spiral_compare(0.4j, 0.3j, 1) == Order.LESS
    # positive real axis is the end of a ring
    assert spiral_compare(-0.3, 0.3, 1) == Order.LESS


def test_ring_boundary_goes_up():
    assert int(rings(0.5, 4)) == 1
    assert int(rings((2 / math.sqrt(7)) * (1 - 1e-13), 7)) == 2
    assert spiral_key(0.5, 4).ring == 1
    assert spiral_key(0, 4).is_origin


@settings(max_examples=200, deadline=None)
@given(points, points, st.integers(1, 64))
def test_compare_antisymmetric(w, z, n):
    a, b = spiral_compare(w, z, n), spiral_compare(z, w, n)
    if complex(w) == complex(z):
        assert a == b == Order.EQUAL
    else:
        assert {a, b} == {Order.LESS, Order.GREATER}


def test_transitivity_random_triples():
    rng = np.random.default_rng(3)
    z = (rng.random((1000, 3)) ** 0.5) * np.exp(2j * np.pi * rng.random((1000, 3)))
    for a, b, c in z:
        if spiral_compare(a, b, 16) == Order.LESS and spiral_compare(b, c, 16) == Order.LESS:
            assert spiral_compare(a, c, 16) == Order.LESS


@settings(max_examples=60, deadline=None)
@given(st.lists(points, min_size=1, max_size=25), st.integers(1, 49))
def test_argsort_agrees_with_comparator(pts, n):
    z = np.array(pts, dtype=complex)
    order = spiral_argsort(z, n)
    brute = sorted(range(len(pts)), key=functools.cmp_to_key(lambda i, j: int(spiral_compare(z[i], z[j], n))))
    assert np.array_equal(z[order], z[brute])


def test_sort_idempotent_and_permutation_invariant():
    s = sample_spectrum(30, 1)
    a = sort_spectrum_spiral(s)
    assert np.array_equal(sort_spectrum_spiral(a).eigenvalues, a.eigenvalues)
    rev = Spectrum(30, s.eigenvalues[::-1])
    assert np.array_equal(sort_spectrum_spiral(rev).eigenvalues, a.eigenvalues)
    assert sorted(a.eigenvalues.tolist(), key=lambda c: (c.real, c.imag)) == \
        sorted(s.eigenvalues.tolist(), key=lambda c: (c.real, c.imag))


def test_two_ring_fixture():
    n = 4  # ring 0 is |z| < 1/2, ring 1 is 1/2 <= |z| < 1
    z = np.array([0.7, 0.1j, 0.6j, -0.2])
    got = z[spiral_argsort(z, n)]
    assert got.tolist() == [0.1j, -0.2, 0.6j, 0.7]


@pytest.mark.parametrize("k,ell,q", [(1, 1, 1), (5, 3, 1), (9, 3, 5), (10, 4, 1), (2, 2, 1)])
def test_lattice_index_examples(k, ell, q):
    idx = lattice_index(k)
    assert (idx.ell, idx.q) == (ell, q)


@settings(max_examples=200)
@given(st.integers(1, 10**9))
def test_lattice_index_invariants(k):
    idx = lattice_index(k)
    assert k == (idx.ell - 1) ** 2 + idx.q and 1 <= idx.q <= 2 * idx.ell - 1
    assert idx.ell == math.ceil(math.sqrt(k)) or k > 2**50


def test_predicted_location_examples():
    assert predicted_location(1, 16) == 0
    assert predicted_location(2, 16) == pytest.approx(0.25 * cmath.exp(2j * math.pi / 3), abs=1e-15)
    assert predicted_location(5, 16) == pytest.approx(0.5 * cmath.exp(2j * math.pi / 5), abs=1e-15)
    assert predicted_location(4, 16) == 0.25  # q = 2l-1 lands on the positive real axis
    with pytest.raises(DomainError):
        predicted_location(17, 16)


@pytest.mark.parametrize("n", [16, 64, 100, 256, 1024, 4096])
def test_lattice_strictly_increasing(n):
    pts = lattice(n, n)
    for k in range(n - 1):
        assert spiral_compare(pts[k], pts[k + 1], n) == Order.LESS
    assert np.array_equal(spiral_argsort(pts, n), np.arange(n))


@pytest.mark.parametrize("n,m", [(16, 12), (10000, 784)])
def test_choose_m_examples(n, m):
    assert choose_m(n) == m


def test_choose_m_small_and_override():
    assert choose_m(64, zero_override=True) == 0
    assert choose_m(65, zero_override=True) == choose_m(65)
    for n in range(2, 16):
        m = choose_m(n)
        assert 0 <= m < n and math.isqrt(n - m) ** 2 == n - m


@pytest.mark.parametrize("n", list(range(16, 3000, 7)) + [10**5, 10**6])
def test_choose_m_bound(n):
    m = choose_m(n)
    L = math.isqrt(n - m)
    assert L * L == n - m and L <= math.sqrt(n) - math.sqrt(math.log(n))
    assert (L + 1) > math.sqrt(n) - math.sqrt(math.log(n))
    assert m <= 3 * math.sqrt(n * math.log(n))


def test_reference_measure_examples():
    ref = build_reference_measure(16, 12)
    assert ref.lattice.size == 4 and ref.annulus_inner == 0.5
    assert ref.lattice[0] == 0
    assert np.allclose(np.sort_complex(ref.lattice[1:]), np.sort_complex(0.25 * np.exp(2j * np.pi * np.arange(1, 4) / 3)))
    assert build_reference_measure(16, 0).lattice.size == 16
    with pytest.raises(DomainError):
        build_reference_measure(10, 3)


def test_reference_measure_invariants():
    for n in (17, 100, 333):
        ref = build_reference_measure(n, choose_m(n))
        for k, z in enumerate(ref.lattice, start=1):
            assert z == predicted_location(k, n)
            assert abs(z) == pytest.approx((lattice_index(k).ell - 1) / math.sqrt(n), abs=1e-15)
        u = ref.sample_annulus(500, np.random.default_rng(0))
        assert np.all((np.abs(u) >= ref.annulus_inner - 1e-12) & (np.abs(u) <= 1 + 1e-12))


def test_sector_centering_and_area():
    n = 64
    for k in range(1, n + 1):
        assert region_area(Sector(k, n)) == pytest.approx(math.pi / n)
        z = predicted_location(k, n)
        idx = lattice_index(k)
        assert abs(z) == pytest.approx((idx.ell - 1) / math.sqrt(n), abs=1e-15)
        if k > 1:
            # lambda~_k is the inner corner at the sector's closing angle
            assert region_contains(Sector(k, n), z * cmath.exp(-1e-9j) * (1 + 1e-9))


def test_coupling_identity_and_single_displacement():
    n = 16
    ref = build_reference_measure(n, 0)
    s = Spectrum(n, ref.lattice.copy())
    assert spiral_coupling_cost(s, ref, 1, 0) == 0.0
    moved = ref.lattice.copy()
    moved[-1] = moved[-1] + 0.01  # stays last in spiral order
    for p in (1.0, 2.0, 3.0):
        assert spiral_coupling_cost(Spectrum(n, moved), ref, p, 0) == pytest.approx((0.01**p / n) ** (1 / p))


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_coupling_dominates_optimum(p):
    ref = build_reference_measure(16, 0)
    for r in range(20):
        s = sample_spectrum(16, 8, r)
        cert, _ = wasserstein_assignment(s.measure(), ref.atoms_measure(), p)
        assert spiral_coupling_cost(s, ref, p, 0) >= cert.value - 1e-12


def test_coupling_with_annulus_is_seeded():
    s = sample_spectrum(40, 2)
    ref = build_reference_measure(40, choose_m(40))
    assert spiral_coupling_cost(s, ref, 2, 5) == spiral_coupling_cost(s, ref, 2, 5)
    with pytest.raises(DomainError):
        spiral_coupling_cost(s, build_reference_measure(16, 0), 1, 0)


def test_quantization_bound_values():
    assert quantization_error_bound(16) == 2.0
    vals = [quantization_error_bound(n) for n in (1, 4, 16, 64, 256)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def _dense_sector_sup(k, n, grid=41):
    idx = lattice_index(k)
    s = math.sqrt(n)
    w = 2 * math.pi / (2 * idx.ell - 1)
    r = np.linspace((idx.ell - 1) / s, idx.ell / s, grid)
    phi = np.linspace(w * (idx.q - 1), w * idx.q, grid)
    z = r[:, None] * np.exp(1j * phi[None, :])
    return np.abs(z - predicted_location(k, n)).max()


def test_corner_enumeration_matches_dense_sampling():
    n = 64
    d = sector_displacements(n)
    dense = np.array([_dense_sector_sup(k, n) for k in range(1, n + 1)])
    assert np.all(dense <= d + 1e-12)  # corners attain the sup
    assert np.allclose(dense, d, atol=1e-12)
    assert d.max() < 1.0


@pytest.mark.parametrize("n", [16, 64, 256, 1024])
def test_sector_displacement_bounds(n):
    mx, per_ring, bound = max_sector_displacement(n)
    assert mx < 8 / math.sqrt(n)
    assert np.all(per_ring <= bound + 1e-15)

"""Spiral order on the plane, the predicted-location lattice and its coupling.

Ring of z at scale n is floor(sqrt(n)|z|). Points within ~1e-9 (relative)
of an integer ring boundary snap upward, so lattice points, which sit
exactly on boundaries in exact arithmetic, get their intended ring despite
rounding in (l-1)/sqrt(n) * sqrt(n).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .measures import TWO_PI, DiscreteMeasure, DomainError, Spectrum, arg_2pi, as_points
from .sampler import TAG_ANNULUS, stream

_SNAP = 1e-9


class Order(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True)
class SpiralKey:
    ring: int
    angle: float
    modulus: float
    is_origin: bool


@dataclass(frozen=True)
class LatticeIndex:
    k: int
    ell: int
    q: int


def rings(z, n: int) -> np.ndarray:
    t = math.sqrt(n) * np.abs(z)
    r = np.floor(t)
    up = np.round(t)
    snap = (up > r) & (np.abs(t - up) <= _SNAP * np.maximum(1.0, t))
    return np.where(snap, up, r).astype(np.int64)


def spiral_key(z, n: int) -> SpiralKey:
    z = complex(z)
    mod = abs(z)
    return SpiralKey(int(rings(z, n)), float(arg_2pi(z)), mod, mod == 0.0)


def spiral_compare(w, z, n: int) -> Order:
    w, z = complex(w), complex(z)
    if w == z:
        return Order.EQUAL
    kw, kz = spiral_key(w, n), spiral_key(z, n)
    if kw.is_origin:
        return Order.LESS
    if kz.is_origin:
        return Order.GREATER
    if kw.ring != kz.ring:
        return Order.LESS if kw.ring < kz.ring else Order.GREATER
    if kw.angle != kz.angle:
        return Order.LESS if kw.angle < kz.angle else Order.GREATER
    # equal angle: larger modulus first
    if kw.modulus != kz.modulus:
        return Order.LESS if kw.modulus > kz.modulus else Order.GREATER
    # distinct points whose keys agree in floating point
    return Order.LESS if (w.real, w.imag) < (z.real, z.imag) else Order.GREATER


def spiral_argsort(z, n: int) -> np.ndarray:
    """Indices putting ``z`` in increasing spiral order (stable on exact ties)."""
    z = as_points(z)
    mod = np.abs(z)
    keys = (z.imag, z.real, -mod, arg_2pi(z), rings(z, n), (mod != 0).astype(np.int8))
    return np.lexsort(keys)


def lattice_index(k: int) -> LatticeIndex:
    if k < 1:
        raise DomainError("k must be >= 1")
    ell = math.isqrt(k - 1) + 1
    return LatticeIndex(k, ell, k - (ell - 1) ** 2)


def predicted_location(k: int, n: int) -> complex:
    if not 1 <= k <= n:
        raise DomainError("need 1 <= k <= n")
    idx = lattice_index(k)
    rad = (idx.ell - 1) / math.sqrt(n)
    if idx.q == 2 * idx.ell - 1:
        return complex(rad, 0.0)  # angle 2pi, kept exactly real
    phi = TWO_PI * idx.q / (2 * idx.ell - 1)
    return complex(rad * math.cos(phi), rad * math.sin(phi))


def lattice(count: int, n: int) -> np.ndarray:
    """lambda~_1 .. lambda~_count as an array."""
    return np.array([predicted_location(k, n) for k in range(1, count + 1)], dtype=np.complex128)


def choose_m(n: int, zero_override: bool = False) -> int:
    if n < 2:
        raise DomainError("need n >= 2")
    root = math.isqrt(n)
    if zero_override and root * root == n:
        return 0
    L = math.floor(math.sqrt(n) - math.sqrt(math.log(n)))
    while L >= 1 and L > math.sqrt(n) - math.sqrt(math.log(n)):
        L -= 1
    if L < 1:
        L = root
    return n - L * L


@dataclass(frozen=True, eq=False)
class PredictedMeasure:
    n: int
    m: int
    lattice: np.ndarray
    annulus_inner: float

    def atoms_measure(self) -> DiscreteMeasure:
        """Lattice part only, renormalised; the whole measure when m = 0."""
        return DiscreteMeasure.uniform(self.lattice)

    def sample_annulus(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draws on {annulus_inner <= |z| <= 1}."""
        u = rng.random((2, count))
        r2 = self.annulus_inner**2 + u[0] * (1.0 - self.annulus_inner**2)
        return np.sqrt(r2) * np.exp(TWO_PI * 1j * u[1])


def build_reference_measure(n: int, m: int) -> PredictedMeasure:
    if n < 1 or not 0 <= m < n:
        raise DomainError("need n >= 1 and 0 <= m < n")
    L = math.isqrt(n - m)
    if L * L != n - m:
        raise DomainError(f"n - m = {n - m} is not a perfect square")
    pts = lattice(n - m, n)
    pts.flags.writeable = False
    return PredictedMeasure(n, m, pts, math.sqrt(1.0 - m / n))


def sort_spectrum_spiral(s: Spectrum) -> Spectrum:
    return s.with_eigenvalues(s.eigenvalues[spiral_argsort(s.eigenvalues, s.n)])


def spiral_coupling_cost(s: Spectrum, ref: PredictedMeasure, p: float, seed: int) -> float:
    """p-th root cost of the spiral coupling between mu_n and nu_n.

    The first n - m eigenvalues in spiral order go to the lattice; the
    outer m go to independent uniform annulus points.
    """
    if s.n != ref.n:
        raise DomainError("spectrum and reference sizes differ")
    if p < 1:
        raise DomainError("need p >= 1")
    ev = s.eigenvalues[spiral_argsort(s.eigenvalues, s.n)]
    inner = ref.n - ref.m
    d = np.abs(ev[:inner] - ref.lattice)
    if ref.m:
        u = ref.sample_annulus(ref.m, stream(seed, s.n, s.replicate, TAG_ANNULUS))
        d = np.concatenate([d, np.abs(ev[inner:] - u)])
    return float((np.sum(d**p) / s.n) ** (1.0 / p))


def quantization_error_bound(n: int, m: int = 0) -> float:
    return 8.0 / math.sqrt(n)


# --
# sector displacement


def sector_displacements(n: int, m: int = 0) -> np.ndarray:
    """sup_{z in S_k} |z - lambda~_k| for k = 1..n-m, by corner enumeration.

    For l >= 2 the sector's angular width is at most 2pi/3 < pi, so the
    distance to a point on the inner arc is maximised at a corner.
    """
    count = n - m
    k = np.arange(1, count + 1)
    ell = np.array([math.isqrt(int(x) - 1) + 1 for x in k])
    q = k - (ell - 1) ** 2
    s = math.sqrt(n)
    width = TWO_PI / (2 * ell - 1)
    centre = lattice(count, n)
    best = np.zeros(count)
    for rad in ((ell - 1) / s, ell / s):
        for phi in (width * (q - 1), width * q):
            corner = rad * np.exp(1j * phi)
            best = np.maximum(best, np.abs(corner - centre))
    return best


def ring_displacement_bound(ell, n: int):
    """Per-ring bound 2 pi l / ((2l - 1) sqrt n) + 1/sqrt n."""
    ell = np.asarray(ell, dtype=np.float64)
    return TWO_PI * ell / ((2 * ell - 1) * math.sqrt(n)) + 1.0 / math.sqrt(n)


def max_sector_displacement(n: int, m: int = 0):
    """(overall max, per-ring max, per-ring bound) over rings 1..sqrt(n-m)."""
    d = sector_displacements(n, m)
    L = math.isqrt(n - m)
    per_ring = np.array([d[(l - 1) ** 2 : l * l].max() for l in range(1, L + 1)])
    return float(d.max()), per_ring, ring_displacement_bound(np.arange(1, L + 1), n)

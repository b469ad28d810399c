"""Geometry and measure primitives: points, discrete measures, regions, counts.

Complex points are plain Python ``complex`` / numpy ``complex128`` values.
Everything here is immutable and safe to share between threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


def as_points(z, copy: bool = False) -> np.ndarray:
    """Coerce to a 1-d complex128 array and reject non-finite values."""
    arr = np.array(z, dtype=np.complex128) if copy else np.asarray(z, dtype=np.complex128)
    arr = np.atleast_1d(arr).ravel()
    if not np.all(np.isfinite(arr)):
        raise DomainError("points must be finite")
    return arr


def arg_2pi(z):
    """Argument taken in (0, 2pi]; a positive real has argument 2pi.

    The origin also maps to 2pi but callers treat it separately.
    """
    a = np.arctan2(np.imag(z), np.real(z))
    return np.where(a <= 0.0, a + TWO_PI, a)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure on the plane.

    Weights are renormalised to sum to one on construction.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = as_points(self.atoms, copy=True)
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64)).ravel()
        if atoms.shape != w.shape:
            raise DomainError(f"{atoms.size} atoms but {w.size} weights")
        if atoms.size == 0:
            raise DomainError("measure needs at least one atom")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise DomainError("weights sum to zero")
        atoms.flags.writeable = False
        w = w / total
        w.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, atoms) -> "DiscreteMeasure":
        atoms = as_points(atoms)
        return cls(atoms, np.full(atoms.size, 1.0 / atoms.size))

    @property
    def size(self) -> int:
        return self.atoms.size

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


# --
# Regions. The variant list is closed; analytics rely on rotational structure.


@dataclass(frozen=True)
class Disc:
    r: float

    def __post_init__(self):
        if not self.r >= 0:
            raise DomainError("radius must be >= 0")


@dataclass(frozen=True)
class DiscComplement:
    R: float

    def __post_init__(self):
        if not self.R >= 0:
            raise DomainError("radius must be >= 0")


@dataclass(frozen=True)
class Annulus:
    r_in: float
    r_out: float

    def __post_init__(self):
        if not (0 <= self.r_in <= self.r_out):
            raise DomainError("need 0 <= r_in <= r_out")


@dataclass(frozen=True)
class Sector:
    """Lattice cell S_k: the k-th sector of the spiral lattice at scale n."""

    k: int
    n: int

    def __post_init__(self):
        if not (1 <= self.k <= self.n):
            raise DomainError("need 1 <= k <= n")

    @property
    def bounds(self):
        ell = math.isqrt(self.k - 1) + 1
        q = self.k - (ell - 1) ** 2
        s = math.sqrt(self.n)
        width = TWO_PI / (2 * ell - 1)
        return (ell - 1) / s, ell / s, width * (q - 1), width * q


@dataclass(frozen=True)
class InitialSegment:
    """Points preceding (j/sqrt n) e^{i theta} in the spiral order."""

    j: int
    theta: float
    n: int

    def __post_init__(self):
        if self.j < 1:
            raise DomainError("need j >= 1")
        if not (0 < self.theta <= TWO_PI):
            raise DomainError("need 0 < theta <= 2pi")
        if self.n < 1:
            raise DomainError("need n >= 1")


Region = Union[Disc, DiscComplement, Annulus, Sector, InitialSegment]


def region_area(region: Region) -> float:
    if isinstance(region, Disc):
        return math.pi * region.r**2
    if isinstance(region, DiscComplement):
        return math.inf
    if isinstance(region, Annulus):
        return math.pi * (region.r_out**2 - region.r_in**2)
    if isinstance(region, Sector):
        r0, r1, a0, a1 = region.bounds
        return 0.5 * (a1 - a0) * (r1 * r1 - r0 * r0)
    if isinstance(region, InitialSegment):
        j, n = region.j, region.n
        if j * j >= n:
            raise DomainError(f"InitialSegment needs j < sqrt(n); got j={j}, n={n}")
        return math.pi / n * (j * j + region.theta / TWO_PI * (2 * j + 1))
    raise DomainError(f"unknown region {region!r}")


def region_contains(region: Region, z):
    """Membership test; vectorised over ``z``.

    Returns a bool for scalar input, a bool array otherwise.
    """
    scalar = np.ndim(z) == 0
    pts = as_points(z)
    mod = np.abs(pts)
    if isinstance(region, Disc):
        out = mod <= region.r
    elif isinstance(region, DiscComplement):
        out = mod > region.R
    elif isinstance(region, Annulus):
        out = (mod >= region.r_in) & (mod <= region.r_out)
    elif isinstance(region, Sector):
        r0, r1, a0, a1 = region.bounds
        a = arg_2pi(pts)
        out = (mod >= r0) & (mod < r1) & (a >= a0) & (a <= a1)
    elif isinstance(region, InitialSegment):
        s = math.sqrt(region.n)
        inner, outer = region.j / s, (region.j + 1) / s
        a = arg_2pi(pts)
        out = (mod < inner) | ((mod >= inner) & (mod < outer) & (a <= region.theta))
    else:
        raise DomainError(f"unknown region {region!r}")
    return bool(out[0]) if scalar else out


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Normalised eigenvalues of one sampled matrix plus provenance."""

    n: int
    eigenvalues: np.ndarray
    seed: int = 0
    replicate: int = 0
    trace_residual: float = 0.0

    def __post_init__(self):
        ev = as_points(self.eigenvalues, copy=True)
        if ev.size != self.n:
            raise DomainError(f"expected {self.n} eigenvalues, got {ev.size}")
        ev.flags.writeable = False
        object.__setattr__(self, "eigenvalues", ev)

    def with_eigenvalues(self, eigenvalues) -> "Spectrum":
        return Spectrum(self.n, eigenvalues, self.seed, self.replicate, self.trace_residual)

    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.uniform(self.eigenvalues)


def count_in_region(spectrum: Spectrum, region: Region) -> int:
    return int(np.count_nonzero(region_contains(region, spectrum.eigenvalues)))


def count_matrix(eigs: np.ndarray, region: Region) -> np.ndarray:
    """Counts for a (reps, n) stack of spectra."""
    eigs = np.asarray(eigs)
    mask = region_contains(region, eigs.ravel()).reshape(eigs.shape)
    return mask.sum(axis=-1)

"""Complex Ginibre sampling, spectra, and two exact distributional oracles.

Every random draw comes from a Philox (counter-based) stream keyed by
``(seed, n, replicate, purpose)``, so replicates are independent of each
other and of evaluation order. Gaussians use Box-Muller on Philox doubles:
``g = sqrt(-log u1) * exp(2 pi i u2)`` gives E|g|^2 = 1 with independent
real/imaginary parts of variance 1/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import DomainError, Spectrum

_MASK64 = (1 << 64) - 1

# stream purposes; never reuse a tag for a different consumer
TAG_MATRIX = 0
TAG_RADII = 1
TAG_COUNT = 2
TAG_ANNULUS = 3


class EigensolverError(RuntimeError):
    def __init__(self, msg, seed, replicate):
        super().__init__(f"{msg} (seed={seed}, replicate={replicate})")
        self.seed = seed
        self.replicate = replicate


def stream(seed: int, n: int, replicate: int, tag: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & _MASK64, int(n), int(replicate), int(tag)])
    return np.random.Generator(np.random.Philox(ss))


def complex_gaussians(rng: np.random.Generator, size) -> np.ndarray:
    u = rng.random((2,) + tuple(np.atleast_1d(size)))
    modulus = np.sqrt(-np.log1p(-u[0]))  # 1 - u in (0, 1]
    return modulus * np.exp(2j * math.pi * u[1])


@dataclass(frozen=True, eq=False)
class GinibreMatrix:
    n: int
    entries: np.ndarray
    seed: int = 0
    replicate: int = 0


@dataclass(frozen=True, eq=False)
class RadialSample:
    n: int
    radii_squared: np.ndarray


def sample_ginibre(n: int, seed: int, replicate: int = 0) -> GinibreMatrix:
    if n < 1:
        raise DomainError("n must be >= 1")
    g = complex_gaussians(stream(seed, n, replicate, TAG_MATRIX), (n, n))
    return GinibreMatrix(n, g, seed, replicate)


def spectrum(g: GinibreMatrix) -> Spectrum:
    n = g.n
    a = np.asarray(g.entries, dtype=np.complex128)
    try:
        ev = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(str(exc), g.seed, g.replicate) from exc
    if not np.all(np.isfinite(ev)):
        raise EigensolverError("non-finite eigenvalues", g.seed, g.replicate)
    scale = 1.0 / math.sqrt(n)
    ev = ev * scale
    resid = abs(ev.sum() - np.trace(a) * scale)
    if resid > 1e-8 * max(1.0, float(np.abs(ev).sum())):
        raise EigensolverError(f"trace identity violated by {resid:.3g}", g.seed, g.replicate)
    return Spectrum(n, ev, g.seed, g.replicate, float(resid))


def sample_spectrum(n: int, seed: int, replicate: int = 0) -> Spectrum:
    return spectrum(sample_ginibre(n, seed, replicate))


def sample_radii_oracle(n: int, seed: int, replicate: int = 0) -> RadialSample:
    """Independent Gamma(k)/n draws, k = 1..n: the law of {|lambda_k|^2}."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = stream(seed, n, replicate, TAG_RADII)
    g = rng.standard_gamma(np.arange(1, n + 1, dtype=np.float64))
    return RadialSample(n, np.sort(g / n))


def sample_disc_count(n: int, r: float, seed: int, replicate: int = 0) -> int:
    """Exact draw of N(rD) as a sum of independent Bernoulli(F_k(n r^2))."""
    from .dpp import bernoulli_profile

    if not r >= 0:
        raise DomainError("r must be >= 0")
    params = bernoulli_profile(n, r).params
    u = stream(seed, n, replicate, TAG_COUNT).random(n)
    return int(np.count_nonzero(u < params))

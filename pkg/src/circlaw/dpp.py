"""Exact and quadrature side of the Ginibre determinantal process.

Coordinates: ``kernel`` and ``var_quadrature`` internals work in the
unnormalised plane (eigenvalues of G itself, density ~ 1/pi on a disc of
radius sqrt(n)); everything taking a Region uses disc-scale coordinates.

F_k(x) = P[Poisson(x) >= k+1] is the regularised lower incomplete gamma
with shape k+1. It is the Bernoulli parameter of the k-th rotational mode
for the disc of radius sqrt(x). Both F and 1-F are returned from the side
of the Poisson sum that is small, so neither loses relative precision.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .kernels import kahan_cumsum
from .measures import (
    TWO_PI,
    Annulus,
    Disc,
    DiscComplement,
    DomainError,
    InitialSegment,
    Region,
    region_area,
)


class QuadratureError(ArithmeticError):
    """Tolerance not met; ``partial`` holds the last estimate."""

    def __init__(self, msg, partial=None, estimate=None):
        super().__init__(msg)
        self.partial = partial
        self.estimate = estimate


class BoundViolation(AssertionError):
    pass


@dataclass(frozen=True)
class CountingStats:
    region: Region
    n: int
    mean: float
    variance: float
    method: str  # closed-form | quadrature | monte-carlo
    error_estimate: float = 0.0


@dataclass(frozen=True, eq=False)
class BernoulliProfile:
    n: int
    x: float
    params: np.ndarray
    complement: np.ndarray  # 1 - params, accurate where params ~ 1


# --
# incomplete gamma via Poisson terms


def incgamma_profile(count: int, x: float):
    """(F_k(x), 1 - F_k(x)) for k = 0..count-1.

    Log Poisson terms come from the upward recurrence
    log t_l = log t_{l-1} + log(x / l), accumulated with compensation.
    """
    count = int(count)
    x = float(x)
    if count < 1:
        return np.zeros(0), np.zeros(0)
    if not x >= 0:
        raise DomainError("x must be >= 0")
    if x == 0.0:
        return np.zeros(count), np.ones(count)
    k = np.arange(count)
    need_tail = count - 1 >= x
    L = count
    if need_tail:
        L = int(math.ceil(max(count, x) + 40.0 * math.sqrt(x) + 60.0))
    steps = np.empty(L)
    steps[0] = -x
    # log(x / l) rather than log x - log l: the rounding of log x would repeat every step
    steps[1:] = np.log(x / np.arange(1, L, dtype=np.float64))
    terms = np.exp(kahan_cumsum(steps))
    lower = kahan_cumsum(terms[:count])  # P[Pois <= k]
    lower = np.minimum(lower, 1.0)
    F = 1.0 - lower
    G = lower.copy()
    if need_tail:
        tail = kahan_cumsum(np.ascontiguousarray(terms[::-1]))[::-1]  # tail[l] = sum_{i >= l}
        up = np.append(tail, 0.0)[1 : count + 1]  # P[Pois >= k+1]
        up = np.minimum(up, 1.0)
        sel = k >= x
        F[sel] = up[sel]
        G[sel] = 1.0 - up[sel]
    return np.clip(F, 0.0, 1.0), np.clip(G, 0.0, 1.0)


def bernoulli_profile(n: int, r: float) -> BernoulliProfile:
    if not r >= 0:
        raise DomainError("r must be >= 0")
    x = n * float(r) ** 2
    F, G = incgamma_profile(n, x)
    return BernoulliProfile(n, x, F, G)


# --
# kernel


def kernel(z, w, n: int) -> complex:
    """K(z, w) for the n-point Ginibre process, unnormalised coordinates."""
    z = complex(z)
    w = complex(w)
    zeta = z * w.conjugate()
    base = -0.5 * (abs(z) ** 2 + abs(w) ** 2)
    if zeta == 0:
        return complex(math.exp(base) / math.pi)
    k = np.arange(n, dtype=np.float64)
    logmag = k * math.log(abs(zeta)) - gammaln(k + 1.0)
    top = logmag.max()
    alpha = math.atan2(zeta.imag, zeta.real)
    mag = np.exp(logmag - top)
    re = math.fsum((mag * np.cos(k * alpha)).tolist())
    im = math.fsum((mag * np.sin(k * alpha)).tolist())
    scale = math.exp(top + base) / math.pi
    return complex(scale * re, scale * im)


def mean_density(w, n: int) -> float:
    """Density of E mu_n at disc-scale w: n K(sqrt n w, sqrt n w) / n."""
    x = n * abs(complex(w)) ** 2
    _, G = incgamma_profile(n, x)
    return float(G[-1]) / math.pi  # Q(n, n|w|^2) / pi


# --
# counting statistics


def _segment_check(j, n):
    if not (1 <= j and (j + 1) ** 2 <= n):
        raise DomainError(f"need 1 <= j <= sqrt(n) - 1; got j={j}, n={n}")


def expected_count(region: Region, n: int) -> CountingStats:
    if isinstance(region, Disc):
        F, G = incgamma_profile(n, n * region.r**2)
        return CountingStats(region, n, float(F.sum()), float((F * G).sum()), "closed-form")
    if isinstance(region, DiscComplement):
        F, G = incgamma_profile(n, n * region.R**2)
        return CountingStats(region, n, float(G.sum()), float((F * G).sum()), "closed-form")
    if isinstance(region, Annulus):
        Fa, _ = incgamma_profile(n, n * region.r_in**2)
        Fb, _ = incgamma_profile(n, n * region.r_out**2)
        p = np.clip(Fb - Fa, 0.0, 1.0)
        return CountingStats(region, n, float(p.sum()), float((p * (1 - p)).sum()), "closed-form")
    if isinstance(region, InitialSegment):
        var, err, mean = var_quadrature_detail(region.j, region.theta, region.n)
        return CountingStats(region, n, mean, var, "quadrature", err)
    raise DomainError(f"expected_count does not support {type(region).__name__}")


def _phase_weights(count, theta):
    d = np.arange(count)[:, None] - np.arange(count)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        P = (2.0 * np.sin(0.5 * theta * d) / d) ** 2
    P[d == 0] = theta * theta
    return P


def var_quadrature_detail(j: int, theta: float, n: int, tol: float = 1e-4, max_nodes: int = 4096):
    """(variance, error estimate, mean) of N(A_{j,theta}).

    Var = E N - iint_{AxA} |K|^2. The disc/disc and disc/ring blocks reduce
    to incomplete gammas; the ring/ring block needs the radial matrix
    R_kl = int_j^{j+1} r^{k+l+1} e^{-r^2} dr / sqrt(k! l!), done by
    Gauss-Legendre with node doubling until successive values agree.
    """
    _segment_check(j, n)
    if not (0 < theta <= TWO_PI):
        raise DomainError("need 0 < theta <= 2pi")
    a, b = float(j * j), float((j + 1) ** 2)
    Fa, _ = incgamma_profile(n, a)
    Fb, _ = incgamma_profile(n, b)
    dF = Fb - Fa
    frac = theta / TWO_PI
    mean = Fa.sum() + frac * dF.sum()
    dd = (Fa * Fa).sum()
    dr = frac * (Fa * dF).sum()
    k = np.arange(n, dtype=np.float64)
    half_logfact = 0.5 * gammaln(k + 1.0)
    P = _phase_weights(n, theta)

    def ring_ring(nodes):
        x, wt = np.polynomial.legendre.leggauss(nodes)
        r = j + 0.5 * (x + 1.0)
        U = np.exp(k[:, None] * np.log(r)[None, :] - 0.5 * r * r - half_logfact[:, None])
        R = (U * (0.5 * wt * r)) @ U.T
        return float((R * R * P).sum()) / math.pi**2

    nodes = 32
    prev = ring_ring(nodes)
    while True:
        nodes *= 2
        cur = ring_ring(nodes)
        err = abs(cur - prev)
        var = mean - dd - 2.0 * dr - cur
        if err <= 0.1 * tol:
            return max(float(var), 0.0), err, float(mean)
        if nodes >= max_nodes:
            raise QuadratureError(f"variance quadrature stalled at {err:.3g}", partial=var, estimate=err)
        prev = cur


def var_quadrature(j: int, theta: float, n: int, tol: float = 1e-4) -> float:
    return var_quadrature_detail(j, theta, n, tol)[0]


def variance_split(j: int, theta: float, n: int) -> dict:
    """Four-block decomposition of Var N(A_{j,theta}) with closed-form radial parts.

    Independent of ``var_quadrature``: uses scipy's gammainc, and the ring
    cross-integrals via int_a^b s^h e^{-s} ds = Gamma(h+1) (P(h+1,b) - P(h+1,a)).
    """
    from scipy.special import gammainc

    _segment_check(j, n)
    a, b = float(j * j), float((j + 1) ** 2)
    k = np.arange(n, dtype=np.float64)
    Pa = gammainc(k + 1, a)
    Pb = gammainc(k + 1, b)
    frac = theta / TWO_PI
    i1 = float(Pa.sum() + frac * (Pb - Pa).sum())
    i2 = float((Pa * Pa).sum())
    i3 = float(frac * (Pa * (Pb - Pa)).sum())
    h = 0.5 * (k[:, None] + k[None, :])
    logc = gammaln(h + 1) - 0.5 * (gammaln(k + 1)[:, None] + gammaln(k + 1)[None, :])
    R = 0.5 * np.exp(logc) * (gammainc(h + 1, b) - gammainc(h + 1, a))
    i4 = float((R * R * _phase_weights(n, theta)).sum()) / math.pi**2
    return {"I1": i1, "I2": i2, "I3": i3, "I4": i4, "variance": i1 - i2 - 2 * i3 - i4}


def expected_count_outside(n: int, R: float):
    """(exact, bound) for E N(C minus R D), R >= 1, evaluated in logs."""
    if not R >= 1:
        raise DomainError("need R >= 1")
    x = n * R * R
    l = np.arange(n, dtype=np.float64)
    logt = -x + l * math.log(x) - gammaln(l + 1) + np.log(n - l)
    top = logt.max()
    log_exact = top + math.log(math.fsum(np.exp(logt - top).tolist()))
    log_bound = -0.5 * math.log(TWO_PI) + 0.5 * math.log(n) + n + 2 * (n - 1) * math.log(R) - x
    if log_exact > log_bound + 1e-12:
        raise BoundViolation(f"outside-disc exact exceeds bound at n={n}, R={R}")
    return math.exp(log_exact), math.exp(log_bound)


def tv_mean_vs_uniform(n: int, tol: float = 1e-8) -> float:
    """d_TV between E mu_n and the uniform law on the unit disc.

    Radial in s = |w|^2 (dw = pi ds): half of int_0^1 P(n, ns) ds plus
    int_1^inf Q(n, ns) ds.
    """
    if n < 1:
        raise DomainError("n must be >= 1")

    def inner(s):
        return incgamma_profile(n, n * s)[0][-1]

    def outer(s):
        return incgamma_profile(n, n * s)[1][-1]

    smax = 1.0 + (40.0 * math.sqrt(n) + 60.0) / n
    i1, e1 = integrate.quad(inner, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=400)
    i2, e2 = integrate.quad(outer, 1.0, smax, epsabs=1e-13, epsrel=1e-12, limit=400)
    if e1 + e2 > tol:
        raise QuadratureError(f"TV quadrature error {e1 + e2:.3g} above {tol}", 0.5 * (i1 + i2), e1 + e2)
    return 0.5 * (i1 + i2)


# --
# utility inequalities


def lemma_gamma_identity(k: int, a: float):
    """(lhs, rhs): quadrature of (1/k!) int_a^inf s^k e^{-s} ds vs the finite sum."""
    if k < 0 or not a > 0:
        raise DomainError("need k >= 0 and a > 0")
    lf = math.lgamma(k + 1)

    def f(s):
        return math.exp(k * math.log(s) - s - lf) if s > 0 else (1.0 if k == 0 else 0.0)

    lhs, _ = integrate.quad(f, a, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)
    rhs = math.fsum(math.exp(-a + l * math.log(a) - math.lgamma(l + 1)) for l in range(k + 1))
    if abs(lhs - rhs) > 1e-10:
        raise BoundViolation(f"gamma identity mismatch {abs(lhs - rhs):.3g} at k={k}, a={a}")
    return lhs, rhs


def lemma_poisson_tail(lam: float, n: int):
    """(tail, bound) with tail = sum_{k >= n} lam^k / k! and bound (e lam / n)^n."""
    if not (0 < lam <= n):
        raise DomainError("need 0 < lam <= n")
    F, _ = incgamma_profile(n, lam)
    log_tail = lam + math.log(F[-1])
    log_bound = n * (1.0 + math.log(lam) - math.log(n))
    if log_tail > log_bound + 1e-12:
        raise BoundViolation(f"Poisson tail exceeds bound at lam={lam}, n={n}")
    return math.exp(log_tail), math.exp(log_bound)


@dataclass(frozen=True)
class Sandwich:
    log_lower: float
    log_value: float
    log_upper: float

    @property
    def lower(self):
        return _exp_or_inf(self.log_lower)

    @property
    def value(self):
        return _exp_or_inf(self.log_value)

    @property
    def upper(self):
        return _exp_or_inf(self.log_upper)

    def __iter__(self):
        return iter((self.lower, self.value, self.upper))


def _exp_or_inf(v):
    return math.exp(v) if v < 709.0 else math.inf


def lemma_stirling(n: int) -> Sandwich:
    """sqrt(2 pi) n^{n+1/2} e^{-n} <= n! <= e n^{n+1/2} e^{-n}, in logs."""
    if n < 1:
        raise DomainError("n must be >= 1")
    core = (n + 0.5) * math.log(n) - n
    s = Sandwich(0.5 * math.log(TWO_PI) + core, math.lgamma(n + 1), 1.0 + core)
    slack = 1e-12 * max(1.0, abs(s.log_value))
    if not (s.log_lower <= s.log_value + slack and s.log_value <= s.log_upper + slack):
        raise BoundViolation(f"Stirling sandwich fails at n={n}")
    return s


# --
# export

ANALYTIC_COLUMNS = ["n", "region", "param1", "param2", "mean", "variance", "bound", "method", "error_estimate"]


def _region_row(region):
    if isinstance(region, Disc):
        return "disc", region.r, ""
    if isinstance(region, DiscComplement):
        return "complement", region.R, ""
    if isinstance(region, Annulus):
        return "annulus", region.r_in, region.r_out
    if isinstance(region, InitialSegment):
        return "segment", region.j, region.theta
    raise DomainError(f"no table encoding for {type(region).__name__}")


def analytic_bound(stats: CountingStats) -> float:
    """Upper mean bound n|A|/pi; outside-disc bound for complements."""
    reg = stats.region
    if isinstance(reg, DiscComplement):
        return expected_count_outside(stats.n, max(reg.R, 1.0))[1] if reg.R >= 1 else float(stats.n)
    return stats.n * region_area(reg) / math.pi


def _fmt(v):
    return "" if v == "" else format(float(v), ".17g")


def write_analytic_table(path, rows: Iterable[CountingStats]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANALYTIC_COLUMNS)
        for s in rows:
            name, p1, p2 = _region_row(s.region)
            w.writerow([s.n, name, _fmt(p1), _fmt(p2), _fmt(s.mean), _fmt(s.variance),
                        _fmt(analytic_bound(s)), s.method, _fmt(s.error_estimate)])

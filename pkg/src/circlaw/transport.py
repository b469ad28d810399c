"""Wasserstein distances between finitely supported measures, with certificates.

Every solve returns dual potentials (alpha, beta) with
alpha_i + beta_j <= c_ij, made exactly feasible by a c-transform, so the
reported lower bound is a genuine dual value and never an estimate.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .measures import DiscreteMeasure, DomainError, Spectrum
from .spiral import lattice, max_sector_displacement

MAX_COST_ENTRIES = 40_000_000  # ~320 MB of float64


class CertificationError(ArithmeticError):
    pass


class ResourceLimitError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TransportPlan:
    source: np.ndarray
    target: np.ndarray
    mass: np.ndarray
    cost_p: float
    p: float
    alpha: np.ndarray | None = None  # source potentials
    beta: np.ndarray | None = None  # target potentials

    @property
    def pairs(self):
        return list(zip(self.source.tolist(), self.target.tolist(), self.mass.tolist()))


@dataclass(frozen=True)
class DistanceCertificate:
    value: float
    lower: float
    upper: float
    method: str  # assignment-exact | flow-exact | auction-approx
    duality_gap: float
    resolution: int | None = None  # M for distances to the uniform law
    sharp_lower: float | None = None
    sharp_upper: float | None = None
    extra: dict = field(default_factory=dict, compare=False)


def cost_matrix(x, y, p: float) -> np.ndarray:
    d = np.abs(np.asarray(x)[:, None] - np.asarray(y)[None, :])
    if p == 1:
        return d
    return np.power(d, p)  # 0 ** p == 0 for p > 0


def _check_p(p):
    if not p >= 1:
        raise DomainError("need p >= 1")


def _c_transform(C, beta):
    return (C - beta[None, :]).min(axis=1)


def _certify(C, a_w, b_w, src, dst, mass, beta):
    """Recompute primal, make duals feasible, return (primal, dual, alpha, beta)."""
    shift = float(np.mean(beta)) if beta.size else 0.0
    beta = beta - shift
    alpha = _c_transform(C, beta)
    primal = math.fsum((mass * C[src, dst]).tolist())
    dual = math.fsum((a_w * alpha).tolist()) + math.fsum((b_w * beta).tolist())
    return primal, dual, alpha, beta


def _root(v, p):
    return max(v, 0.0) ** (1.0 / p)


def _check_marginals(src, dst, mass, a_w, b_w):
    ra = np.bincount(src, weights=mass, minlength=a_w.size)
    rb = np.bincount(dst, weights=mass, minlength=b_w.size)
    if np.any(mass < 0) or np.abs(ra - a_w).max() > 1e-10 or np.abs(rb - b_w).max() > 1e-10:
        raise CertificationError("plan marginals do not match the measures")


def _check_size(na, nb):
    if na * nb > MAX_COST_ENTRIES:
        raise ResourceLimitError(
            f"{na}x{nb} cost matrix exceeds {MAX_COST_ENTRIES} entries; use a smaller M or auction mode")


def wasserstein_assignment(a: DiscreteMeasure, b: DiscreteMeasure, p: float = 1.0, solver: str = "exact"):
    """Exact (or auction) W_p between two uniform measures of equal size."""
    _check_p(p)
    if a.size != b.size or not (a.is_uniform() and b.is_uniform()):
        raise DomainError("assignment needs equal-size uniform measures; use wasserstein_flow")
    n = a.size
    _check_size(n, n)
    C = np.ascontiguousarray(cost_matrix(a.atoms, b.atoms, p))
    w = np.full(n, 1.0 / n)
    if solver == "exact":
        col, u, v = kernels.lap_sap(C)
        beta = np.asarray(v)
        method = "assignment-exact"
    elif solver == "auction":
        col, price, *_ = kernels.auction(C)
        beta = -np.asarray(price)
        method = "auction-approx"
    else:
        raise DomainError(f"unknown solver {solver!r}")
    src = np.arange(n)
    dst = np.asarray(col, dtype=np.int64)
    mass = w.copy()
    primal, dual, alpha, beta = _certify(C, w, w, src, dst, mass, beta)
    gap = max(primal - dual, 0.0)
    plan = TransportPlan(src, dst, mass, primal, p, alpha, beta)
    val = _root(primal, p)
    cert = DistanceCertificate(val, min(_root(dual, p), val), val, method, gap)
    return cert, plan


def _integral_scale(a: DiscreteMeasure, b: DiscreteMeasure):
    if a.is_uniform() and b.is_uniform():
        L = math.lcm(a.size, b.size)
        return float(L), np.full(a.size, float(L // a.size)), np.full(b.size, float(L // b.size))
    return 1.0, np.asarray(a.weights, dtype=np.float64), np.asarray(b.weights, dtype=np.float64)


def wasserstein_flow(a: DiscreteMeasure, b: DiscreteMeasure, p: float = 1.0):
    """Exact W_p between arbitrary discrete measures by transportation simplex."""
    _check_p(p)
    _check_size(a.size, b.size)
    C = np.ascontiguousarray(cost_matrix(a.atoms, b.atoms, p))
    scale, sup, dem = _integral_scale(a, b)
    basic, flow, pi, _ = kernels.network_simplex(sup, dem, C)
    basic = np.asarray(basic)
    flow = np.asarray(flow)
    E0 = a.size * b.size
    art = basic >= E0
    if flow[art].sum() > 1e-12 * sup.sum():
        raise CertificationError("artificial arcs carry flow; measures have unequal mass")
    basic, flow = basic[~art], flow[~art]
    src = basic // b.size
    dst = basic % b.size
    mass = flow / scale
    a_w = np.asarray(a.weights)
    b_w = np.asarray(b.weights)
    _check_marginals(src, dst, mass, a_w, b_w)
    pi = np.asarray(pi)
    beta = -pi[a.size : a.size + b.size]
    primal, dual, alpha, beta = _certify(C, a_w, b_w, src, dst, mass, beta)
    gap = max(primal - dual, 0.0)
    plan = TransportPlan(src, dst, mass, primal, p, alpha, beta)
    val = _root(primal, p)
    return DistanceCertificate(val, min(_root(dual, p), val), val, "flow-exact", gap), plan


def w1_duality_check(a: DiscreteMeasure, b: DiscreteMeasure, plan: TransportPlan) -> float:
    """Primal minus Kantorovich-Rubinstein dual for a p = 1 plan.

    The test function is read off the solver's potentials on the joint
    support, f(x_i) = alpha_i and f(y_j) = -beta_j. It must be 1-Lipschitz
    there (then it extends to the plane); optimal complementary-slack
    potentials always are, forged or stale ones generally are not.
    """
    if plan.p != 1:
        raise DomainError("duality check is for p = 1 plans")
    alpha, beta = plan.alpha, plan.beta
    if alpha is None or beta is None:
        _, ref = wasserstein_flow(a, b, 1.0)
        alpha, beta = ref.alpha, ref.beta
    pts = np.concatenate([a.atoms, b.atoms])
    fv = np.concatenate([np.asarray(alpha, dtype=np.float64), -np.asarray(beta, dtype=np.float64)])
    for lo in range(0, pts.size, 512):
        blk = slice(lo, lo + 512)
        dist = np.abs(pts[blk, None] - pts[None, :])
        worst = (np.abs(fv[blk, None] - fv[None, :]) - dist).max()
        if worst > 1e-10:
            raise CertificationError(f"dual potential is not 1-Lipschitz (excess {worst:.3g})")
    C = np.abs(a.atoms[plan.source] - b.atoms[plan.target])
    primal = math.fsum((plan.mass * C).tolist())
    dual = math.fsum((a.weights * fv[: a.size]).tolist()) - math.fsum((b.weights * fv[a.size :]).tolist())
    return max(primal - dual, 0.0)


def uniform_lattice(M: int) -> DiscreteMeasure:
    L = math.isqrt(M)
    if M < 1 or L * L != M:
        raise DomainError("M must be a positive perfect square")
    return DiscreteMeasure.uniform(lattice(M, M))


def wasserstein_measure_to_uniform(mu: DiscreteMeasure, p: float, M: int, solver: str = "exact"):
    """Certified interval for W_p(mu, uniform disc law) via the M-point lattice."""
    _check_p(p)
    if M < mu.size:
        raise DomainError("need M >= number of atoms")
    rho = uniform_lattice(M)
    _check_size(mu.size, M)
    if M == mu.size and mu.is_uniform():
        cert, _ = wasserstein_assignment(mu, rho, p, solver)
    elif solver == "auction" and mu.is_uniform() and M % mu.size == 0:
        rep = DiscreteMeasure.uniform(np.repeat(mu.atoms, M // mu.size))
        cert, _ = wasserstein_assignment(rep, rho, p, "auction")
    else:
        cert, _ = wasserstein_flow(mu, rho, p)
    half = 8.0 / math.sqrt(M)
    sharp = max_sector_displacement(M)[0]
    return DistanceCertificate(
        cert.value,
        max(cert.lower - half, 0.0),
        cert.upper + half,
        cert.method,
        cert.duality_gap,
        resolution=M,
        sharp_lower=max(cert.lower - sharp, 0.0),
        sharp_upper=cert.upper + sharp,
    )


def wasserstein_to_uniform(s: Spectrum, p: float, M: int, solver: str = "exact") -> DistanceCertificate:
    return wasserstein_measure_to_uniform(s.measure(), p, M, solver)


def quantization_lower_bound(n: int) -> float:
    if n < 1:
        raise DomainError("n must be >= 1")
    return 2.0 / (3.0 * math.sqrt(3.0 * n))


def write_plan_csv(path, plan: TransportPlan) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source_index", "target_index", "mass"])
        for i, j, m in plan.pairs:
            w.writerow([i, j, format(m, ".17g")])

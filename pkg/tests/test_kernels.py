"""Compiled kernels vs the pure-Python fallback, plus solver-level oracles."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment, linprog

from circlaw import _purepy, kernels

try:
    from circlaw import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

BACKENDS = [pytest.param(_purepy, id="python")]
if compiled is not None:
    BACKENDS.append(pytest.param(compiled, id="cython"))
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _rand_cost(rng, n, m=None):
    m = n if m is None else m
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    b = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.ascontiguousarray(np.abs(a[:, None] - b[None, :]))


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")
    if compiled is not None:
        assert kernels.BACKEND == "cython" or __import__("os").environ.get("CIRCLAW_PURE_PYTHON") == "1"


@pytest.mark.parametrize("mod", BACKENDS)
def test_kahan_cumsum(mod):
    x = np.array([1.0, 1e-16, 1e-16, -1.0] * 1000)
    got = np.asarray(mod.kahan_cumsum(x))
    naive = np.cumsum(x)[-1]
    assert abs(got[-1] - math.fsum(x)) < 0.2 * abs(naive - math.fsum(x))
    assert np.asarray(mod.kahan_cumsum(np.zeros(0))).size == 0
    rng = np.random.default_rng(0)
    y = rng.standard_normal(500)
    ref = np.array([math.fsum(y[: i + 1]) for i in range(y.size)])
    assert np.abs(np.asarray(mod.kahan_cumsum(y)) - ref).max() < 1e-13


@pytest.mark.parametrize("mod", BACKENDS)
@pytest.mark.parametrize("n", [1, 2, 5, 17, 60])
def test_lap_sap_matches_scipy(mod, n):
    rng = np.random.default_rng(n)
    C = _rand_cost(rng, n)
    col, u, v = mod.lap_sap(C)
    col = np.asarray(col)
    r, c = linear_sum_assignment(C)
    assert sorted(col.tolist()) == list(range(n))
    assert C[np.arange(n), col].sum() == pytest.approx(C[r, c].sum(), abs=1e-12)
    # dual feasibility and complementary slackness
    red = C - np.asarray(u)[:, None] - np.asarray(v)[None, :]
    assert red.min() >= -1e-10
    assert np.abs(red[np.arange(n), col]).max() <= 1e-10


@pytest.mark.parametrize("mod", BACKENDS)
def test_lap_sap_ties_and_rejects_nonfinite(mod):
    col, *_ = mod.lap_sap(np.ones((4, 4)))
    assert sorted(np.asarray(col).tolist()) == [0, 1, 2, 3]
    bad = np.ones((2, 2))
    bad[0, 0] = np.nan
    with pytest.raises(mod.KernelError):
        mod.lap_sap(bad)
    with pytest.raises(mod.KernelError):
        mod.auction(bad)
    with pytest.raises(mod.KernelError):
        mod.network_simplex(np.ones(2), np.ones(2), bad)


@pytest.mark.parametrize("mod", BACKENDS)
@pytest.mark.parametrize("n", [3, 10, 80])
def test_auction_gap_and_bound(mod, n):
    rng = np.random.default_rng(100 + n)
    C = _rand_cost(rng, n)
    col, price, primal, lower, eps, bids = mod.auction(C)
    col = np.asarray(col)
    opt = C[linear_sum_assignment(C)].sum()
    assert sorted(col.tolist()) == list(range(n))
    assert primal == pytest.approx(C[np.arange(n), col].sum(), rel=1e-12)
    assert lower <= opt + 1e-9 <= primal + 2e-9
    assert primal - lower <= 1e-2 * primal + 1e-12


def _nw_check(mod, sup, dem, C):
    basic, flow, pi, piv = mod.network_simplex(np.asarray(sup, float), np.asarray(dem, float), C)
    basic, flow = np.asarray(basic), np.asarray(flow)
    ns, nt = C.shape
    real = basic < ns * nt
    X = np.zeros(ns * nt)
    np.add.at(X, basic[real], flow[real])
    X = X.reshape(ns, nt)
    return X, np.asarray(pi), piv


def _lp(sup, dem, C):
    ns, nt = C.shape
    A = np.zeros((ns + nt, ns * nt))
    for i in range(ns):
        A[i, i * nt : (i + 1) * nt] = 1
    for j in range(nt):
        A[ns + j, j::nt] = 1
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([sup, dem]), bounds=(0, None), method="highs")
    return res.fun


@pytest.mark.parametrize("mod", BACKENDS)
@pytest.mark.parametrize("shape", [(1, 1), (1, 5), (4, 6), (7, 3), (20, 45)])
def test_network_simplex_matches_lp(mod, shape):
    rng = np.random.default_rng(sum(shape))
    C = _rand_cost(rng, *shape)
    sup = rng.integers(1, 9, shape[0]).astype(float)
    dem = rng.multinomial(int(sup.sum()) - shape[1], np.full(shape[1], 1 / shape[1])) + 1.0
    X, _, _ = _nw_check(mod, sup, dem, C)
    assert np.all(X >= -1e-12)
    assert np.allclose(X.sum(1), sup) and np.allclose(X.sum(0), dem)
    assert (X * C).sum() == pytest.approx(_lp(sup, dem, C), abs=1e-9)


def _integral_flows(sup, dem):
    """Every nonnegative integer matrix with the given margins."""
    sup, dem = list(map(int, sup)), list(map(int, dem))
    nt = len(dem)

    def rows(total, caps, j):
        if j == nt - 1:
            if total <= caps[j]:
                yield (total,)
            return
        for x in range(min(total, caps[j]) + 1):
            for rest in rows(total - x, caps, j + 1):
                yield (x,) + rest

    def fill(i, caps):
        if i == len(sup):
            if not any(caps):
                yield ()
            return
        for r in rows(sup[i], caps, 0):
            for tail in fill(i + 1, [c - x for c, x in zip(caps, r)]):
                yield (r,) + tail

    return fill(0, dem)


@pytest.mark.parametrize("trial", range(5))
def test_network_simplex_4x6_vertex_enumeration(trial):
    rng = np.random.default_rng(trial)
    C = _rand_cost(rng, 4, 6)
    sup = rng.multinomial(8, np.full(4, 0.25)) + 1  # total 12
    dem = np.full(6, 2)
    best = min((np.asarray(X) * C).sum() for X in _integral_flows(sup, dem))
    X, _, _ = _nw_check(kernels, sup.astype(float), dem.astype(float), C)
    assert (X * C).sum() == pytest.approx(best, abs=1e-12)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_parity_lap(n, seed):
    C = _rand_cost(np.random.default_rng(seed), n)
    a, b = compiled.lap_sap(C), _purepy.lap_sap(C)
    assert np.array_equal(np.asarray(a[0]), np.asarray(b[0]))
    assert np.allclose(a[1], b[1], atol=1e-12) and np.allclose(a[2], b[2], atol=1e-12)


@needs_compiled
@settings(max_examples=30, deadline=None)
@given(st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_parity_auction(n, seed):
    C = _rand_cost(np.random.default_rng(seed), n)
    a, b = compiled.auction(C), _purepy.auction(C)
    assert np.array_equal(np.asarray(a[0]), np.asarray(b[0]))
    assert a[2] == pytest.approx(b[2], abs=1e-12) and a[5] == b[5]


@needs_compiled
@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_parity_network_simplex(ns, nt, seed):
    rng = np.random.default_rng(seed)
    C = _rand_cost(rng, ns, nt)
    sup = np.full(ns, float(nt))
    dem = np.full(nt, float(ns))
    a = compiled.network_simplex(sup, dem, C)
    b = _purepy.network_simplex(sup, dem, C)
    assert np.array_equal(np.asarray(a[0]), np.asarray(b[0]))
    assert np.allclose(a[1], b[1], atol=1e-12) and a[3] == b[3]


@needs_compiled
def test_parity_kahan():
    x = np.random.default_rng(1).standard_normal(1000)
    assert np.array_equal(np.asarray(compiled.kahan_cumsum(x)), np.asarray(_purepy.kahan_cumsum(x)))


@pytest.mark.parametrize("n", range(2, 6))
def test_lap_brute_force_small(n):
    rng = np.random.default_rng(n)
    perms = np.array(list(itertools.permutations(range(n))))
    for _ in range(50):
        C = _rand_cost(rng, n)
        col, *_ = kernels.lap_sap(C)
        brute = C[np.arange(n), perms].sum(1).min()
        assert C[np.arange(n), np.asarray(col)].sum() == pytest.approx(brute, abs=1e-12)


@needs_compiled
@pytest.mark.parametrize("shape", [(4, 9), (9, 4), (1, 1), (7, 7)])
def test_parity_network_simplex_square_arc_count(shape):
    # ns*nt + ns + nt a perfect square exercises the pricing block size
    rng = np.random.default_rng(0)
    for _ in range(10):
        C = _rand_cost(rng, *shape)
        sup, dem = np.full(shape[0], float(shape[1])), np.full(shape[1], float(shape[0]))
        a, b = compiled.network_simplex(sup, dem, C), _purepy.network_simplex(sup, dem, C)
        assert a[3] == b[3] and np.array_equal(np.asarray(a[0]), np.asarray(b[0]))

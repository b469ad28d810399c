"""Compiled kernels vs the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--sizes 64,256] [--repeat 3]

Prints one row per (kernel, size) with the best-of-repeat wall time of each
backend, the speedup, and whether the two backends returned the same answer.
"""
import argparse
import sys
import time

import numpy as np

from circlaw import _purepy

try:
    from circlaw import _kernels as compiled
except ImportError:
    compiled = None


def _cost(n, m, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    b = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.ascontiguousarray(np.abs(a[:, None] - b[None, :]))


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(sizes):
    for n in sizes:
        C = _cost(n, n, n)
        yield "lap_sap", f"{n}x{n}", (lambda mod, C=C: mod.lap_sap(C)), lambda r: np.asarray(r[0])
        yield "auction", f"{n}x{n}", (lambda mod, C=C: mod.auction(C)), lambda r: (np.asarray(r[0]), r[5])
        ns, nt = max(2, n // 8), n
        R = _cost(ns, nt, n + 1)
        sup, dem = np.full(ns, float(nt)), np.full(nt, float(ns))
        yield ("network_simplex", f"{ns}x{nt}", (lambda mod, R=R, s=sup, d=dem: mod.network_simplex(s, d, R)),
               lambda r: (np.asarray(r[0]), r[3]))
        x = np.random.default_rng(n).standard_normal(200 * n)
        yield "kahan_cumsum", f"{x.size}", (lambda mod, x=x: mod.kahan_cumsum(x)), lambda r: np.asarray(r)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", default="64,128,256", help="comma-separated problem sizes")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"{'kernel':<16}{'size':>10}{'cython s':>12}{'python s':>12}{'speedup':>10}  same")
    for name, size, run, key in cases(sizes):
        tc, rc = _best(lambda: run(compiled), args.repeat)
        tp, rp = _best(lambda: run(_purepy), args.repeat)
        print(f"{name:<16}{size:>10}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}  {_same(key(rc), key(rp))}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

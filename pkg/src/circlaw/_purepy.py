"""Pure-Python/numpy versions of the ``_kernels`` extension.

Same signatures and return conventions; used when the extension is not
built or ``CIRCLAW_PURE_PYTHON=1`` is set. Row scans are vectorised with
numpy where that keeps the algorithm identical; tree updates are plain
Python on lists.
"""
from __future__ import annotations

import math

import numpy as np


class KernelError(RuntimeError):
    pass


def _check_finite(cost):
    if not np.isfinite(np.asarray(cost)).all():
        raise KernelError("cost matrix has non-finite entries")


def kahan_cumsum(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    s = 0.0
    c = 0.0
    for i, xi in enumerate(x.tolist()):
        y = xi - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i] = s
    return out


def lap_sap(cost):
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("cost matrix must be square")
    _check_finite(cost)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)
    u = np.zeros(n)
    v = np.zeros(n)
    path = np.full(n, -1, dtype=np.int64)
    for cur in range(n):
        shortest = np.full(n, np.inf)
        remaining = np.ones(n, dtype=bool)
        SR = np.zeros(n, dtype=bool)
        SC = np.zeros(n, dtype=bool)
        min_val = 0.0
        i = cur
        sink = -1
        while sink == -1:
            SR[i] = True
            cols = np.flatnonzero(remaining)
            r = min_val + cost[i, cols] - u[i] - v[cols]
            better = r < shortest[cols]
            path[cols[better]] = i
            shortest[cols[better]] = r[better]
            sc = shortest[cols]
            lowest = sc.min()
            if lowest == np.inf:
                raise KernelError("infeasible assignment (infinite costs)")
            tied = cols[sc == lowest]
            free = tied[row4col[tied] == -1]
            j = int(free[0]) if free.size else int(tied[0])
            min_val = lowest
            if row4col[j] == -1:
                sink = j
            else:
                i = int(row4col[j])
            SC[j] = True
            remaining[j] = False
        u[cur] += min_val
        rows = np.flatnonzero(SR)
        rows = rows[rows != cur]
        u[rows] += min_val - shortest[col4row[rows]]
        v[SC] -= min_val - shortest[SC]
        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, int(col4row[i])
            if i == cur:
                break
    return col4row, u, v


def _assignment_lower(cost, price):
    return float((cost + price[None, :]).min(axis=1).sum() - price.sum())


def auction(cost, rel_gap=1e-2, scale=5.0, max_bids=2_000_000_000):
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("cost matrix must be square")
    _check_finite(cost)
    col4row = np.full(n, -1, dtype=np.int64)
    price = np.zeros(n)
    if n == 1:
        col4row[0] = 0
        return col4row, price, float(cost[0, 0]), float(cost[0, 0]), 0.0, 0
    cmax = max(float(cost.max()), 0.0)
    eps = cmax / 4.0 if cmax > 0 else 1.0
    bids = 0
    while True:
        owner = np.full(n, -1, dtype=np.int64)
        col4row[:] = -1
        stack = list(range(n - 1, -1, -1))
        while stack:
            i = stack.pop()
            val = -cost[i] - price
            j1 = int(np.argmax(val))
            w1 = val[j1]
            val[j1] = -np.inf
            w2 = val.max()
            price[j1] += w1 - w2 + eps
            old = owner[j1]
            if old != -1:
                col4row[old] = -1
                stack.append(int(old))
            owner[j1] = i
            col4row[i] = j1
            bids += 1
            if bids > max_bids:
                raise KernelError("auction bid budget exhausted")
        primal = float(cost[np.arange(n), col4row].sum())
        lower = _assignment_lower(cost, price)
        if primal - lower <= rel_gap * abs(primal) or eps < 1e-15 * (cmax + 1.0):
            break
        eps /= scale
    return col4row, price, primal, lower, eps, bids


def network_simplex(supply, demand, cost, max_pivots=-1):
    supply = np.asarray(supply, dtype=np.float64)
    demand = np.asarray(demand, dtype=np.float64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    ns, nt = supply.size, demand.size
    if cost.shape != (ns, nt):
        raise ValueError("cost shape mismatch")
    _check_finite(cost)
    if np.any(cost < 0):
        raise ValueError("costs must be nonnegative")
    N = ns + nt
    root = N
    E0 = ns * nt
    E = E0 + N
    cmax = float(cost.max()) if cost.size else 0.0
    art = (N + 1) * cmax + 1.0
    tol = 1e-13 * art
    if max_pivots < 0:
        max_pivots = 50 * E + 1_000_000

    cflat = cost.ravel().tolist()

    def tail(e):
        if e < E0:
            return e // nt
        e -= E0
        return e if e < ns else root

    def head(e):
        if e < E0:
            return ns + e % nt
        e -= E0
        return root if e < ns else e

    def ecost(e):
        return cflat[e] if e < E0 else art

    flow = [0.0] * E
    pi = [0.0] * (N + 1)
    for v in range(N):
        if v < ns:
            flow[E0 + v] = float(supply[v])
            pi[v] = art
        else:
            flow[E0 + v] = float(demand[v - ns])
            pi[v] = -art
    parent = [root] * N + [-1]
    edge = [E0 + v for v in range(N)] + [-1]
    size = [1] * N + [N + 1]
    nxt = list(range(1, N + 1)) + [0]
    prv = [root] + list(range(N - 1)) + [N - 1]
    prv[0] = root
    last = list(range(N)) + [N - 1]

    # reduced costs are recomputed from numpy views for the block search
    tails = np.concatenate([np.repeat(np.arange(ns), nt), np.arange(N)])
    heads = np.concatenate([np.tile(np.arange(ns, N), ns), np.where(np.arange(N) < ns, root, np.arange(N))])
    tails[E0:][ns:] = root
    costs = np.concatenate([cost.ravel(), np.full(N, art)])

    B = math.isqrt(E) + 1
    nblocks = (E + B - 1) // B
    f = 0
    pivots = 0
    while True:
        pia = np.asarray(pi)
        entering = -1
        for _ in range(nblocks):
            idx = (f + np.arange(B)) % E
            rc = costs[idx] - pia[tails[idx]] + pia[heads[idx]]
            k = int(np.argmin(rc))
            f = (f + B) % E
            if rc[k] < -tol:
                entering = int(idx[k])
                break
        if entering == -1:
            break
        pivots += 1
        if pivots > max_pivots:
            raise KernelError("network simplex pivot budget exhausted")
        i = entering
        p, q = tail(i), head(i)

        a, b = p, q
        while a != b:
            if size[a] < size[b]:
                a = parent[a]
            elif size[a] > size[b]:
                b = parent[b]
            else:
                a = parent[a]
                b = parent[b]
        w = a

        pn, pe = [], []
        v = p
        while v != w:
            pn.append(v)
            pe.append(edge[v])
            v = parent[v]
        cyc_nodes = [w] + pn[::-1]
        cyc_edges = pe[::-1] + [i]
        v = q
        while v != w:
            cyc_nodes.append(v)
            cyc_edges.append(edge[v])
            v = parent[v]

        j = -1
        s = -1
        delta = math.inf
        for k in range(len(cyc_edges) - 1, -1, -1):
            e = cyc_edges[k]
            if tail(e) != cyc_nodes[k] and flow[e] < delta:
                delta = flow[e]
                j = e
                s = cyc_nodes[k]
        if j == -1:
            raise KernelError("unbounded transportation problem")
        for e, node in zip(cyc_edges, cyc_nodes):
            if tail(e) == node:
                flow[e] += delta
            else:
                flow[e] = max(flow[e] - delta, 0.0)
        flow[j] = 0.0

        t = head(j) if tail(j) == s else tail(j)
        if parent[t] != s:
            s, t = t, s
        for e in cyc_edges:
            if e == j:
                p, q = q, p
                break
            if e == i:
                break

        size_t = size[t]
        prev_t = prv[t]
        last_t = last[t]
        next_last_t = nxt[last_t]
        parent[t] = -1
        edge[t] = -1
        nxt[prev_t] = next_last_t
        prv[next_last_t] = prev_t
        nxt[last_t] = t
        prv[t] = last_t
        v = s
        while v != -1:
            size[v] -= size_t
            if last[v] == last_t:
                last[v] = prev_t
            v = parent[v]

        anc = []
        v = q
        while v != -1:
            anc.append(v)
            v = parent[v]
        anc.reverse()
        for a, b in zip(anc, anc[1:]):
            size_p = size[a]
            last_p = last[a]
            prev_q = prv[b]
            last_q = last[b]
            next_last_q = nxt[last_q]
            parent[a] = b
            parent[b] = -1
            edge[a] = edge[b]
            edge[b] = -1
            size[a] = size_p - size[b]
            size[b] = size_p
            nxt[prev_q] = next_last_q
            prv[next_last_q] = prev_q
            nxt[last_q] = b
            prv[b] = last_q
            if last_p == last_q:
                last[a] = prev_q
                last_p = prev_q
            prv[a] = last_q
            nxt[last_q] = a
            nxt[last_p] = b
            prv[b] = last_p
            last[b] = last_p

        last_p = last[p]
        next_last_p = nxt[last_p]
        size_q = size[q]
        last_q = last[q]
        parent[q] = p
        edge[q] = i
        nxt[last_p] = q
        prv[q] = last_p
        prv[next_last_p] = last_q
        nxt[last_q] = next_last_p
        v = p
        while v != -1:
            size[v] += size_q
            if last[v] == last_p:
                last[v] = last_q
            v = parent[v]

        c = ecost(i)
        d = pi[p] - c - pi[q] if q == head(i) else pi[p] + c - pi[q]
        v = q
        pi[v] += d
        while v != last[q]:
            v = nxt[v]
            pi[v] += d

    flow_arr = np.asarray(flow)
    basic = np.flatnonzero(flow_arr > 0.0)
    return basic, flow_arr[basic], np.asarray(pi), pivots

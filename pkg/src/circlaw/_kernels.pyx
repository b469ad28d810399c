# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: dense assignment, auction, transportation simplex.

Mirrors ``_purepy`` function by function; ``circlaw.kernels`` picks one.
"""
import math

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()


class KernelError(RuntimeError):
    pass


def _check_finite(cost):
    if not np.isfinite(np.asarray(cost)).all():
        raise KernelError("cost matrix has non-finite entries")


def kahan_cumsum(const double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double s = 0.0, c = 0.0, y, t
    for i in range(n):
        y = x[i] - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i] = s
    return out_arr


def lap_sap(const double[:, ::1] cost):
    """Shortest augmenting path assignment on a dense square matrix.

    Returns (col4row, u, v) with u[i] + v[j] <= cost[i, j] and equality
    on assigned pairs.
    """
    cdef Py_ssize_t n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("cost matrix must be square")
    _check_finite(cost)
    col4row_arr = np.full(n, -1, dtype=np.int64)
    u_arr = np.zeros(n)
    v_arr = np.zeros(n)
    cdef long long[::1] col4row = col4row_arr
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef long long[::1] row4col = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] path = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] remaining = np.empty(n, dtype=np.int64)
    cdef double[::1] shortest = np.empty(n)
    cdef char[::1] SR = np.zeros(n, dtype=np.int8)
    cdef char[::1] SC = np.zeros(n, dtype=np.int8)
    cdef Py_ssize_t cur, i, j, it, index, num_remaining, sink
    cdef double min_val, lowest, r, ui

    for cur in range(n):
        for j in range(n):
            remaining[j] = n - 1 - j
            shortest[j] = INFINITY
            SC[j] = 0
        for i in range(n):
            SR[i] = 0
        num_remaining = n
        min_val = 0.0
        i = cur
        sink = -1
        while sink == -1:
            SR[i] = 1
            index = -1
            lowest = INFINITY
            ui = u[i]
            for it in range(num_remaining):
                j = remaining[it]
                r = min_val + cost[i, j] - ui - v[j]
                if r < shortest[j]:
                    path[j] = i
                    shortest[j] = r
                if shortest[j] < lowest or (shortest[j] == lowest and row4col[j] == -1):
                    lowest = shortest[j]
                    index = it
            min_val = lowest
            if min_val == INFINITY:
                raise KernelError("infeasible assignment (infinite costs)")
            j = remaining[index]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
            SC[j] = 1
            num_remaining -= 1
            remaining[index] = remaining[num_remaining]

        u[cur] += min_val
        for i in range(n):
            if SR[i] and i != cur:
                u[i] += min_val - shortest[col4row[i]]
        for j in range(n):
            if SC[j]:
                v[j] -= min_val - shortest[j]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            it = col4row[i]
            col4row[i] = j
            j = it
            if i == cur:
                break
    return col4row_arr, u_arr, v_arr


cdef double _assignment_lower(const double[:, ::1] cost, double[::1] price, Py_ssize_t n):
    cdef Py_ssize_t i, j
    cdef double total = 0.0, best, val
    for i in range(n):
        best = INFINITY
        for j in range(n):
            val = cost[i, j] + price[j]
            if val < best:
                best = val
        total += best
    for j in range(n):
        total -= price[j]
    return total


def auction(const double[:, ::1] cost, double rel_gap=1e-2, double scale=5.0,
            long long max_bids=2000000000):
    """Forward auction with epsilon scaling for min-cost assignment.

    Phases shrink epsilon until (primal - dual) <= rel_gap * primal.
    Returns (col4row, price, primal, lower, eps, bids).
    """
    cdef Py_ssize_t n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("cost matrix must be square")
    _check_finite(cost)
    col4row_arr = np.full(n, -1, dtype=np.int64)
    price_arr = np.zeros(n)
    cdef long long[::1] col4row = col4row_arr
    cdef double[::1] price = price_arr
    cdef long long[::1] owner = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] stack = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i, j, j1, top, old
    cdef double w1, w2, val, cmax = 0.0, eps, primal = 0.0, lower = 0.0
    cdef long long bids = 0

    for i in range(n):
        for j in range(n):
            if cost[i, j] > cmax:
                cmax = cost[i, j]
    if n == 1:
        col4row[0] = 0
        return col4row_arr, price_arr, cost[0, 0], cost[0, 0], 0.0, 0
    eps = cmax / 4.0 if cmax > 0 else 1.0
    while True:
        for i in range(n):
            col4row[i] = -1
            owner[i] = -1
            stack[i] = n - 1 - i
        top = n
        while top > 0:
            top -= 1
            i = stack[top]
            w1 = -INFINITY
            w2 = -INFINITY
            j1 = -1
            for j in range(n):
                val = -cost[i, j] - price[j]
                if val > w1:
                    w2 = w1
                    w1 = val
                    j1 = j
                elif val > w2:
                    w2 = val
            price[j1] += w1 - w2 + eps
            old = owner[j1]
            if old != -1:
                col4row[old] = -1
                stack[top] = old
                top += 1
            owner[j1] = i
            col4row[i] = j1
            bids += 1
            if bids > max_bids:
                raise KernelError("auction bid budget exhausted")
        primal = 0.0
        for i in range(n):
            primal += cost[i, col4row[i]]
        lower = _assignment_lower(cost, price, n)
        if primal - lower <= rel_gap * fabs(primal) or eps < 1e-15 * (cmax + 1.0):
            break
        eps /= scale
    return col4row_arr, price_arr, primal, lower, eps, bids


# --
# Transportation network simplex. Nodes: sources 0..ns-1, sinks ns..N-1,
# artificial root N. Arc e < ns*nt is source e//nt -> sink e%nt; arc
# ns*nt + v joins node v to the root. Tree bookkeeping (parent, thread,
# subtree size, last descendant) follows the classic spanning-tree scheme.


cdef inline Py_ssize_t _tail(Py_ssize_t e, Py_ssize_t E0, Py_ssize_t nt, Py_ssize_t ns, Py_ssize_t root):
    if e < E0:
        return e // nt
    e -= E0
    return e if e < ns else root


cdef inline Py_ssize_t _head(Py_ssize_t e, Py_ssize_t E0, Py_ssize_t nt, Py_ssize_t ns, Py_ssize_t root):
    if e < E0:
        return ns + e % nt
    e -= E0
    return root if e < ns else e


def network_simplex(const double[::1] supply, const double[::1] demand, const double[:, ::1] cost,
                    long long max_pivots=-1):
    """Min-cost transportation by primal network simplex.

    Returns (basic_arcs, flows, potentials, pivots). Potentials satisfy
    cost - pi[tail] + pi[head] >= -tol on every arc at termination.
    """
    cdef Py_ssize_t ns = supply.shape[0], nt = demand.shape[0]
    if cost.shape[0] != ns or cost.shape[1] != nt:
        raise ValueError("cost shape mismatch")
    _check_finite(cost)
    cdef Py_ssize_t N = ns + nt, root = ns + nt
    cdef Py_ssize_t E0 = ns * nt, E = E0 + N
    cdef Py_ssize_t i, j, e, k, v, p, q, w, s, t, f, B, nblocks, m, l
    cdef Py_ssize_t lp, lq, ncyc, jidx, iidx, na, a_, b_
    cdef double cmax = 0.0, art, c, rc, best, delta, tol, res, d
    cdef long long pivots = 0

    for i in range(ns):
        for j in range(nt):
            if cost[i, j] > cmax:
                cmax = cost[i, j]
            if cost[i, j] < 0:
                raise ValueError("costs must be nonnegative")
    art = (N + 1) * cmax + 1.0
    tol = 1e-13 * art
    if max_pivots < 0:
        max_pivots = 50 * E + 1000000

    flow_arr = np.zeros(E)
    pi_arr = np.zeros(N + 1)
    cdef double[::1] flow = flow_arr
    cdef double[::1] pi = pi_arr
    cdef long long[::1] parent = np.empty(N + 1, dtype=np.int64)
    cdef long long[::1] edge = np.empty(N + 1, dtype=np.int64)
    cdef long long[::1] size = np.empty(N + 1, dtype=np.int64)
    cdef long long[::1] nxt = np.empty(N + 1, dtype=np.int64)
    cdef long long[::1] prv = np.empty(N + 1, dtype=np.int64)
    cdef long long[::1] last = np.empty(N + 1, dtype=np.int64)
    cdef long long[::1] cyc_nodes = np.empty(N + 2, dtype=np.int64)
    cdef long long[::1] cyc_edges = np.empty(N + 2, dtype=np.int64)
    cdef long long[::1] qpath_n = np.empty(N + 2, dtype=np.int64)
    cdef long long[::1] qpath_e = np.empty(N + 2, dtype=np.int64)
    cdef long long[::1] anc = np.empty(N + 2, dtype=np.int64)
    cdef long long size_p, size_q, size_t, last_p, last_q, prev_q, prev_t, last_t
    cdef long long next_last_q, next_last_t, next_last_p

    for v in range(N):
        e = E0 + v
        if v < ns:
            flow[e] = supply[v]
            pi[v] = art
        else:
            flow[e] = demand[v - ns]
            pi[v] = -art
        parent[v] = root
        edge[v] = e
        size[v] = 1
        nxt[v] = v + 1
        prv[v] = v - 1
        last[v] = v
    pi[root] = 0.0
    parent[root] = -1
    edge[root] = -1
    size[root] = N + 1
    nxt[N - 1] = root
    nxt[root] = 0
    prv[0] = root
    prv[root] = N - 1
    last[root] = N - 1

    B = math.isqrt(E) + 1
    nblocks = (E + B - 1) // B
    f = 0
    while True:
        # entering arc: Dantzig within a block, blocks scanned cyclically
        iidx = -1
        m = 0
        while m < nblocks:
            best = -tol
            for k in range(B):
                e = f + k
                if e >= E:
                    e -= E
                if e < E0:
                    c = cost[e // nt, e % nt]
                else:
                    c = art
                rc = c - pi[_tail(e, E0, nt, ns, root)] + pi[_head(e, E0, nt, ns, root)]
                if rc < best:
                    best = rc
                    iidx = e
            f += B
            if f >= E:
                f -= E
            if iidx != -1:
                break
            m += 1
        if iidx == -1:
            break
        pivots += 1
        if pivots > max_pivots:
            raise KernelError("network simplex pivot budget exhausted")

        p = _tail(iidx, E0, nt, ns, root)
        q = _head(iidx, E0, nt, ns, root)

        # apex of p and q
        a_ = p
        b_ = q
        size_p = size[a_]
        size_q = size[b_]
        while True:
            while size_p < size_q:
                a_ = parent[a_]
                size_p = size[a_]
            while size_p > size_q:
                b_ = parent[b_]
                size_q = size[b_]
            if size_p == size_q:
                if a_ != b_:
                    a_ = parent[a_]
                    size_p = size[a_]
                    b_ = parent[b_]
                    size_q = size[b_]
                else:
                    break
        w = a_

        # cycle: w .. p, entering arc, q .. w
        lp = 0
        v = p
        while v != w:
            qpath_n[lp] = v
            qpath_e[lp] = edge[v]
            lp += 1
            v = parent[v]
        # qpath holds p-path (p .. child of w); reverse into cycle
        cyc_nodes[0] = w
        for k in range(lp):
            cyc_nodes[k + 1] = qpath_n[lp - 1 - k]
            cyc_edges[k] = qpath_e[lp - 1 - k]
        cyc_edges[lp] = iidx
        ncyc = lp + 1
        v = q
        while v != w:
            cyc_nodes[ncyc] = v
            cyc_edges[ncyc] = edge[v]
            ncyc += 1
            v = parent[v]
        # cyc_nodes[k] is the node from which cyc_edges[k] is traversed

        # leaving arc: last minimum-residual backward arc along the cycle
        jidx = -1
        s = -1
        delta = INFINITY
        for k in range(ncyc - 1, -1, -1):
            e = cyc_edges[k]
            if _tail(e, E0, nt, ns, root) != cyc_nodes[k]:
                res = flow[e]
                if res < delta:
                    delta = res
                    jidx = e
                    s = cyc_nodes[k]
        if jidx == -1:
            raise KernelError("unbounded transportation problem")

        for k in range(ncyc):
            e = cyc_edges[k]
            if _tail(e, E0, nt, ns, root) == cyc_nodes[k]:
                flow[e] += delta
            else:
                flow[e] -= delta
                if flow[e] < 0.0:
                    flow[e] = 0.0
        flow[jidx] = 0.0

        t = _head(jidx, E0, nt, ns, root) if _tail(jidx, E0, nt, ns, root) == s else _tail(jidx, E0, nt, ns, root)
        if parent[t] != s:
            s, t = t, s
        # q must end up in the subtree rooted at t
        for k in range(ncyc):
            e = cyc_edges[k]
            if e == jidx:
                p, q = q, p
                break
            if e == iidx:
                break

        # remove (s, t)
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

        # re-root the detached subtree at q
        na = 0
        v = q
        while v != -1:
            anc[na] = v
            na += 1
            v = parent[v]
        for k in range(na - 1, 0, -1):
            a_ = anc[k]
            b_ = anc[k - 1]
            size_p = size[a_]
            last_p = last[a_]
            prev_q = prv[b_]
            last_q = last[b_]
            next_last_q = nxt[last_q]
            parent[a_] = b_
            parent[b_] = -1
            edge[a_] = edge[b_]
            edge[b_] = -1
            size[a_] = size_p - size[b_]
            size[b_] = size_p
            nxt[prev_q] = next_last_q
            prv[next_last_q] = prev_q
            nxt[last_q] = b_
            prv[b_] = last_q
            if last_p == last_q:
                last[a_] = prev_q
                last_p = prev_q
            prv[a_] = last_q
            nxt[last_q] = a_
            nxt[last_p] = b_
            prv[b_] = last_p
            last[b_] = last_p

        # attach q below p through the entering arc
        last_p = last[p]
        next_last_p = nxt[last_p]
        size_q = size[q]
        last_q = last[q]
        parent[q] = p
        edge[q] = iidx
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

        # shift potentials of q's subtree so the entering arc is tight
        c = cost[iidx // nt, iidx % nt] if iidx < E0 else art
        if q == _head(iidx, E0, nt, ns, root):
            d = pi[p] - c - pi[q]
        else:
            d = pi[p] + c - pi[q]
        v = q
        l = last[q]
        pi[v] += d
        while v != l:
            v = nxt[v]
            pi[v] += d

    basic = np.flatnonzero(flow_arr > 0.0)
    return basic, flow_arr[basic], pi_arr, pivots

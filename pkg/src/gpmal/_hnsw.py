"""Navigable small-world graph kernels (build / search / batch query).

Everything here is njit-compatible and free of Python objects: plain
ndarrays, explicit array-backed heaps, stamped visited sets, and an
int64 counter cell that tallies every point-to-point distance
computation (the sub-quadratic complexity checks read it).
``_backend.jit_kernel`` compiles each function under numba; with
GPMAL_BACKEND=numpy the same bodies run as plain Python
(``benchmarks/bench_backends.py`` times the two paths).

Graph layout
    levels   (n,)  int32       top layer of each node
    adj0     (n, M0) int32     layer-0 adjacency (+ adj0_d distances)
    adj_hi   (n, L, M) int32   layers 1..L at index l-1 (+ adj_hi_d)
    deg0     (n,) int32, deg_hi (n, L) int32

Insertion order is always 0..n-1 and node levels are drawn outside the
kernels, so a (points, levels, params) triple fully determines the graph.
Neighbour selection is the diversity heuristic (keep a candidate only
when it is closer to the query than to every kept neighbour), applied to
both insertion and overflow shrinking, without backfill.
"""

import numpy as np

from ._backend import jit_kernel


@jit_kernel
def _dq(points, qvec, b):
    s = 0.0
    for k in range(points.shape[1]):
        diff = qvec[k] - points[b, k]
        s += diff * diff
    return s


@jit_kernel
def _dp(points, a, b):
    s = 0.0
    for k in range(points.shape[1]):
        diff = points[a, k] - points[b, k]
        s += diff * diff
    return s


# array-backed binary heaps over parallel (dist, id) arrays

@jit_kernel
def _hpush_min(hd, hi, size, d, i):
    pos = size
    hd[pos] = d
    hi[pos] = i
    while pos > 0:
        par = (pos - 1) // 2
        if hd[par] > hd[pos]:
            hd[par], hd[pos] = hd[pos], hd[par]
            hi[par], hi[pos] = hi[pos], hi[par]
            pos = par
        else:
            break
    return size + 1


@jit_kernel
def _hpop_min(hd, hi, size):
    d0 = hd[0]
    i0 = hi[0]
    size -= 1
    hd[0] = hd[size]
    hi[0] = hi[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        best = pos
        if left < size and hd[left] < hd[best]:
            best = left
        if right < size and hd[right] < hd[best]:
            best = right
        if best == pos:
            break
        hd[best], hd[pos] = hd[pos], hd[best]
        hi[best], hi[pos] = hi[pos], hi[best]
        pos = best
    return d0, i0, size


@jit_kernel
def _hpush_max(hd, hi, size, d, i):
    pos = size
    hd[pos] = d
    hi[pos] = i
    while pos > 0:
        par = (pos - 1) // 2
        if hd[par] < hd[pos]:
            hd[par], hd[pos] = hd[pos], hd[par]
            hi[par], hi[pos] = hi[pos], hi[par]
            pos = par
        else:
            break
    return size + 1


@jit_kernel
def _hreplace_max(hd, hi, size, d, i):
    """Overwrite the max-heap root and sift down (cheaper than pop+push)."""
    hd[0] = d
    hi[0] = i
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        best = pos
        if left < size and hd[left] > hd[best]:
            best = left
        if right < size and hd[right] > hd[best]:
            best = right
        if best == pos:
            break
        hd[best], hd[pos] = hd[pos], hd[best]
        hi[best], hi[pos] = hi[pos], hi[best]
        pos = best


@jit_kernel
def _hpop_max(hd, hi, size):
    d0 = hd[0]
    i0 = hi[0]
    size -= 1
    hd[0] = hd[size]
    hi[0] = hi[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        best = pos
        if left < size and hd[left] > hd[best]:
            best = left
        if right < size and hd[right] > hd[best]:
            best = right
        if best == pos:
            break
        hd[best], hd[pos] = hd[pos], hd[best]
        hi[best], hi[pos] = hi[pos], hi[best]
        pos = best
    return d0, i0, size


@jit_kernel
def _sort_dist_id(dists, ids):
    """Sorted copies, ascending by distance with ascending-id tie-break."""
    order = np.argsort(dists, kind="mergesort")
    sd = dists[order]
    si = ids[order]
    n = sd.shape[0]
    i = 0
    while i < n:
        j = i + 1
        while j < n and sd[j] == sd[i]:
            j += 1
        if j - i > 1:
            si[i:j] = np.sort(si[i:j])
        i = j
    return sd, si


@jit_kernel
def _search_layer(points, qvec, adj, deg, eps, n_eps, ef, visited, stamp_cell,
                  cand_d, cand_i, res_d, res_i, counter):
    """Beam search on one layer.

    Leaves up to ef (dist, id) pairs in the res_* workspace as a max-heap
    and returns their count.  ``visited`` is a stamp array shared across
    calls; heap workspaces must hold n+2 entries.
    """
    stamp_cell[0] += 1
    stamp = stamp_cell[0]
    nd = 0
    csize = 0
    rsize = 0
    for k in range(n_eps):
        e = eps[k]
        if visited[e] == stamp:
            continue
        visited[e] = stamp
        d = _dq(points, qvec, e)
        nd += 1
        csize = _hpush_min(cand_d, cand_i, csize, d, e)
        if rsize < ef:
            rsize = _hpush_max(res_d, res_i, rsize, d, e)
        elif d < res_d[0]:
            _hreplace_max(res_d, res_i, rsize, d, e)
    while csize > 0:
        d, c, csize = _hpop_min(cand_d, cand_i, csize)
        if rsize >= ef and d > res_d[0]:
            break
        for t in range(deg[c]):
            j = adj[c, t]
            if visited[j] == stamp:
                continue
            visited[j] = stamp
            dj = _dq(points, qvec, j)
            nd += 1
            if rsize < ef:
                csize = _hpush_min(cand_d, cand_i, csize, dj, j)
                rsize = _hpush_max(res_d, res_i, rsize, dj, j)
            elif dj < res_d[0]:
                csize = _hpush_min(cand_d, cand_i, csize, dj, j)
                _hreplace_max(res_d, res_i, rsize, dj, j)
    counter[0] += nd
    return rsize


@jit_kernel
def _select_heuristic(points, cand_d, cand_i, m, sel_d, sel_i, counter):
    """Diversity-aware neighbour selection over (dist, id)-sorted candidates.

    Keeps a candidate only when it is closer to the query than to every
    already-kept neighbour; may keep fewer than m.  Fills the sel_*
    workspace and returns the count.
    """
    cnt = cand_d.shape[0]
    nd = 0
    nsel = 0
    for k in range(cnt):
        if nsel >= m:
            break
        e = cand_i[k]
        de = cand_d[k]
        good = True
        for s in range(nsel):
            nd += 1
            if _dp(points, e, sel_i[s]) < de:
                good = False
                break
        if good:
            sel_d[nsel] = de
            sel_i[nsel] = e
            nsel += 1
    counter[0] += nd
    return nsel


@jit_kernel
def _link(points, adj, adj_d, deg, a, b, d_ab, cap, sel_d, sel_i, counter):
    """Append b (at stored distance d_ab) to a's list; shrink on overflow."""
    da = deg[a]
    for t in range(da):
        if adj[a, t] == b:
            return
    if da < cap:
        adj[a, da] = b
        adj_d[a, da] = d_ab
        deg[a] = da + 1
        return
    cd = np.empty(da + 1, dtype=np.float64)
    ci = np.empty(da + 1, dtype=np.int32)
    for t in range(da):
        ci[t] = adj[a, t]
        cd[t] = adj_d[a, t]
    ci[da] = b
    cd[da] = d_ab
    cd, ci = _sort_dist_id(cd, ci)
    ns = _select_heuristic(points, cd, ci, cap, sel_d, sel_i, counter)
    for t in range(ns):
        adj[a, t] = sel_i[t]
        adj_d[a, t] = sel_d[t]
    deg[a] = ns


@jit_kernel
def _greedy_descend(points, adj_hi, deg_hi, qvec, entry, top, stop_level,
                    visited, stamp_cell, cand_d, cand_i, res_d, res_i, counter):
    """Single-entry greedy search from the top layer down to stop_level+1."""
    ep = entry
    eps = np.empty(1, dtype=np.int32)
    lc = top
    while lc > stop_level:
        eps[0] = ep
        rsize = _search_layer(points, qvec, adj_hi[:, lc - 1, :],
                              deg_hi[:, lc - 1], eps, 1, 1, visited, stamp_cell,
                              cand_d, cand_i, res_d, res_i, counter)
        if rsize > 0:
            ep = res_i[0]
        lc -= 1
    return ep


@jit_kernel
def build_graph(points, levels, M, M0, ef_construction, counter):
    n = points.shape[0]
    lmax = 1
    for i in range(n):
        if levels[i] > lmax:
            lmax = levels[i]
    adj0 = np.full((n, M0), -1, dtype=np.int32)
    adj0_d = np.zeros((n, M0), dtype=np.float64)
    deg0 = np.zeros(n, dtype=np.int32)
    adj_hi = np.full((n, lmax, M), -1, dtype=np.int32)
    adj_hi_d = np.zeros((n, lmax, M), dtype=np.float64)
    deg_hi = np.zeros((n, lmax), dtype=np.int32)
    visited = np.zeros(n, dtype=np.int64)
    stamp_cell = np.zeros(1, dtype=np.int64)
    cand_d = np.empty(n + 2, dtype=np.float64)
    cand_i = np.empty(n + 2, dtype=np.int32)
    res_d = np.empty(n + 2, dtype=np.float64)
    res_i = np.empty(n + 2, dtype=np.int32)
    sel_d = np.empty(M0 + 2, dtype=np.float64)
    sel_i = np.empty(M0 + 2, dtype=np.int32)
    link_d = np.empty(M0 + 2, dtype=np.float64)
    link_i = np.empty(M0 + 2, dtype=np.int32)
    entry = 0
    top = int(levels[0])
    for q in range(1, n):
        lq = int(levels[q])
        qvec = points[q]
        ep = _greedy_descend(points, adj_hi, deg_hi, qvec, entry, top, lq,
                             visited, stamp_cell, cand_d, cand_i, res_d, res_i,
                             counter)
        eps = np.empty(1, dtype=np.int32)
        eps[0] = ep
        n_eps = 1
        lc = min(lq, top)
        while lc >= 0:
            if lc == 0:
                adj = adj0
                adj_d = adj0_d
                deg = deg0
                cap = M0
            else:
                adj = adj_hi[:, lc - 1, :]
                adj_d = adj_hi_d[:, lc - 1, :]
                deg = deg_hi[:, lc - 1]
                cap = M
            rsize = _search_layer(points, qvec, adj, deg, eps, n_eps,
                                  ef_construction, visited, stamp_cell,
                                  cand_d, cand_i, res_d, res_i, counter)
            rd, ri = _sort_dist_id(res_d[:rsize], res_i[:rsize])
            ns = _select_heuristic(points, rd, ri, M, sel_d, sel_i, counter)
            for t in range(ns):
                s = sel_i[t]
                ds = sel_d[t]
                _link(points, adj, adj_d, deg, q, s, ds, cap, link_d, link_i,
                      counter)
                _link(points, adj, adj_d, deg, s, q, ds, cap, link_d, link_i,
                      counter)
            eps = ri
            n_eps = rsize
            lc -= 1
        if lq > top:
            entry = q
            top = lq
    return adj0, adj0_d, deg0, adj_hi, adj_hi_d, deg_hi, entry, top


@jit_kernel
def search_knn(points, adj0, deg0, adj_hi, deg_hi, entry, top, qvec, ef, counter):
    """Full top-down query; returns (dists, ids) sorted by (dist, id)."""
    n = points.shape[0]
    visited = np.zeros(n, dtype=np.int64)
    stamp_cell = np.zeros(1, dtype=np.int64)
    cand_d = np.empty(n + 2, dtype=np.float64)
    cand_i = np.empty(n + 2, dtype=np.int32)
    res_d = np.empty(n + 2, dtype=np.float64)
    res_i = np.empty(n + 2, dtype=np.int32)
    ef_eff = min(ef, n)
    ep = _greedy_descend(points, adj_hi, deg_hi, qvec, entry, top, 0, visited,
                         stamp_cell, cand_d, cand_i, res_d, res_i, counter)
    eps = np.empty(1, dtype=np.int32)
    eps[0] = ep
    rsize = _search_layer(points, qvec, adj0, deg0, eps, 1, ef_eff, visited,
                          stamp_cell, cand_d, cand_i, res_d, res_i, counter)
    return _sort_dist_id(res_d[:rsize], res_i[:rsize])


@jit_kernel
def batch_self_knn(points, adj0, deg0, adj_hi, deg_hi, entry, top, K, ef,
                   counter):
    """K neighbour ids for every indexed point, self excluded.

    The rare query that surfaces fewer than K distinct others (a
    disconnected fragment) is topped up by a brute-force scan over the
    unseen ids, merged in (dist, id) order; those scans hit the distance
    counter like any other computation.
    """
    n = points.shape[0]
    out = np.empty((n, K), dtype=np.int32)
    want = ef if ef > K + 1 else K + 1
    want = min(want, n)
    visited = np.zeros(n, dtype=np.int64)
    stamp_cell = np.zeros(1, dtype=np.int64)
    cand_d = np.empty(n + 2, dtype=np.float64)
    cand_i = np.empty(n + 2, dtype=np.int32)
    res_d = np.empty(n + 2, dtype=np.float64)
    res_i = np.empty(n + 2, dtype=np.int32)
    eps = np.empty(1, dtype=np.int32)
    for i in range(n):
        qvec = points[i]
        ep = _greedy_descend(points, adj_hi, deg_hi, qvec, entry, top, 0,
                             visited, stamp_cell, cand_d, cand_i, res_d, res_i,
                             counter)
        eps[0] = ep
        rsize = _search_layer(points, qvec, adj0, deg0, eps, 1, want, visited,
                              stamp_cell, cand_d, cand_i, res_d, res_i, counter)
        rd, ri = _sort_dist_id(res_d[:rsize], res_i[:rsize])
        cnt = 0
        for t in range(rsize):
            if ri[t] != i and cnt < K:
                out[i, cnt] = ri[t]
                cnt += 1
        if cnt < K:
            seen = np.zeros(n, dtype=np.uint8)
            seen[i] = 1
            for t in range(rsize):
                seen[ri[t]] = 1
            md = np.empty(n, dtype=np.float64)
            mi = np.empty(n, dtype=np.int32)
            nm = 0
            nd = 0
            for j in range(n):
                if seen[j] == 0:
                    md[nm] = _dq(points, qvec, j)
                    nd += 1
                    mi[nm] = j
                    nm += 1
            counter[0] += nd
            sd, si = _sort_dist_id(md[:nm].copy(), mi[:nm].copy())
            fd = np.empty(rsize, dtype=np.float64)
            fi = np.empty(rsize, dtype=np.int32)
            nf = 0
            for t in range(rsize):
                if ri[t] != i:
                    fd[nf] = rd[t]
                    fi[nf] = ri[t]
                    nf += 1
            a = 0
            b = 0
            cnt = 0
            while cnt < K:
                take_found = False
                if a < nf and b < nm:
                    if fd[a] < sd[b] or (fd[a] == sd[b] and fi[a] < si[b]):
                        take_found = True
                elif a < nf:
                    take_found = True
                if take_found:
                    out[i, cnt] = fi[a]
                    a += 1
                else:
                    out[i, cnt] = si[b]
                    b += 1
                cnt += 1
    return out

"""Hot numeric kernels.

Two families live here:

* ``observe`` decides the connectivity-with-assignment condition on plain
  integer arrays (union-find contraction followed by a graphic x partition
  matroid intersection).  With numba disabled the very same loops run
  in the interpreter.
* ``rank_mod_p`` computes matrix rank over the prime field of order
  ``2**61 - 1``.  The jitted variant is a scalar triple loop; the fallback
  is a row-vectorised numpy elimination.

All modular arithmetic stays inside uint64: products are split into 32-bit
halves and folded with the Mersenne identity ``2**61 == 1 (mod p)``.
"""

import numpy as np

from ._jit import USE_NUMBA, njit

MERSENNE61 = (1 << 61) - 1

_P = np.uint64(MERSENNE61)
_LOW32 = np.uint64(0xFFFFFFFF)
_LOW29 = np.uint64((1 << 29) - 1)
_S3 = np.uint64(3)
_S29 = np.uint64(29)
_S32 = np.uint64(32)
_S61 = np.uint64(61)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)


# ---------------------------------------------------------------- union-find

@njit
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return False
    # smaller representative wins so labellings are reproducible
    if ra < rb:
        parent[rb] = ra
    else:
        parent[ra] = rb
    return True


@njit
def count_components(n_nodes, eu, ev):
    """Number of connected components of the multigraph ``(range(n), eu-ev)``."""
    parent = np.arange(n_nodes)
    k = n_nodes
    for e in range(eu.shape[0]):
        if _union(parent, eu[e], ev[e]):
            k -= 1
    return k


# ------------------------------------------------------- matroid intersection

@njit
def max_forest_assignment(k, owner, ea, eb, n_owners):
    """Maximum common independent set of two matroids on candidate edges.

    Candidate ``t`` joins contracted nodes ``ea[t]``-``eb[t]`` (labels in
    ``range(k)``) and belongs to part ``owner[t]``.  The first matroid is
    the graphic matroid on ``k`` nodes, the second allows one candidate per
    owner.  Returns a boolean selection mask.
    """
    m = owner.shape[0]
    in_s = np.zeros(m, np.bool_)
    used = np.zeros(n_owners, np.bool_)
    parent = np.arange(k)
    size = 0
    for t in range(m):
        if not used[owner[t]] and _union(parent, ea[t], eb[t]):
            in_s[t] = True
            used[owner[t]] = True
            size += 1

    members = np.empty(m, np.int64)
    pos = np.full(m, -1, np.int64)
    pred = np.empty(m, np.int64)
    queue = np.empty(m, np.int64)
    while size < k - 1:
        ns = 0
        for t in range(m):
            pos[t] = -1
            if in_s[t]:
                members[ns] = t
                pos[t] = ns
                ns += 1
        # forest labels of S - x, one row per member x
        lab_wo = np.empty((ns, k), np.int64)
        for r in range(ns):
            par = np.arange(k)
            for q in range(ns):
                if q != r:
                    _union(par, ea[members[q]], eb[members[q]])
            for v in range(k):
                lab_wo[r, v] = _find(par, v)
        par = np.arange(k)
        for q in range(ns):
            _union(par, ea[members[q]], eb[members[q]])

        for t in range(m):
            pred[t] = -2
        head = 0
        tail = 0
        for y in range(m):
            if not in_s[y] and _find(par, ea[y]) != _find(par, eb[y]):
                pred[y] = -1
                queue[tail] = y
                tail += 1
        sink = -1
        while head < tail:
            v = queue[head]
            head += 1
            if not in_s[v]:
                if not used[owner[v]]:
                    sink = v
                    break
                for r in range(ns):
                    x = members[r]
                    if pred[x] == -2 and owner[x] == owner[v]:
                        pred[x] = v
                        queue[tail] = x
                        tail += 1
            else:
                r = pos[v]
                for y in range(m):
                    if not in_s[y] and pred[y] == -2 and lab_wo[r, ea[y]] != lab_wo[r, eb[y]]:
                        pred[y] = v
                        queue[tail] = y
                        tail += 1
        if sink < 0:
            break
        v = sink
        while True:
            in_s[v] = not in_s[v]
            if pred[v] == -1:
                break
            v = pred[v]
        used[:] = False
        for t in range(m):
            if in_s[t]:
                used[owner[t]] = True
        size += 1
    return in_s


@njit
def observe(n, eu, ev, adj_ptr, adj_nbr, adj_edge, inj_on, line_on, pmu_on, use_root):
    """Connectivity-with-assignment test on internal indices.

    Node ``n`` is the reference node when ``use_root``.  PMU buses link
    themselves and their neighbours to it; protected lines are always
    present; each protected injection may contribute one incident line.
    Returns ``(feasible, g)`` where ``g[b]`` is the line index assigned to
    injection bus ``b`` (``-1`` if ``b`` is not a protected injection or
    has no incident line).
    """
    n_nodes = n + 1 if use_root else n
    parent = np.arange(n_nodes)
    if use_root:
        for b in range(n):
            if pmu_on[b]:
                _union(parent, b, n)
                for p in range(adj_ptr[b], adj_ptr[b + 1]):
                    _union(parent, adj_nbr[p], n)
    for e in range(eu.shape[0]):
        if line_on[e]:
            _union(parent, eu[e], ev[e])

    comp = np.empty(n_nodes, np.int64)
    label = np.full(n_nodes, -1, np.int64)
    k = 0
    for v in range(n_nodes):
        r = _find(parent, v)
        if label[r] < 0:
            label[r] = k
            k += 1
        comp[v] = label[r]

    cnt = 0
    for b in range(n):
        if inj_on[b]:
            for p in range(adj_ptr[b], adj_ptr[b + 1]):
                if comp[b] != comp[adj_nbr[p]]:
                    cnt += 1
    owner = np.empty(cnt, np.int64)
    ea = np.empty(cnt, np.int64)
    eb = np.empty(cnt, np.int64)
    edge = np.empty(cnt, np.int64)
    t = 0
    for b in range(n):
        if inj_on[b]:
            for p in range(adj_ptr[b], adj_ptr[b + 1]):
                if comp[b] != comp[adj_nbr[p]]:
                    owner[t] = b
                    ea[t] = comp[b]
                    eb[t] = comp[adj_nbr[p]]
                    edge[t] = adj_edge[p]
                    t += 1

    g = np.full(n, -1, np.int64)
    if k <= 1:
        feasible = True
    else:
        sel = max_forest_assignment(k, owner, ea, eb, n)
        size = 0
        for t in range(cnt):
            if sel[t]:
                g[owner[t]] = edge[t]
                size += 1
        feasible = size == k - 1
    for b in range(n):
        if inj_on[b] and g[b] < 0 and adj_ptr[b + 1] > adj_ptr[b]:
            g[b] = adj_edge[adj_ptr[b]]
    return feasible, g


# ------------------------------------------------------ arithmetic mod 2^61-1

@njit
def mulmod(a, b):
    """``a * b mod (2**61 - 1)`` for uint64 operands below the modulus."""
    a1 = a >> _S32
    a0 = a & _LOW32
    b1 = b >> _S32
    b0 = b & _LOW32
    mid = a1 * b0 + a0 * b1
    lo = a0 * b0
    t = ((a1 * b1) << _S3) + (mid >> _S29) + ((mid & _LOW29) << _S32) + (lo & _P) + (lo >> _S61)
    t = (t & _P) + (t >> _S61)
    if t >= _P:
        t -= _P
    return t


@njit
def powmod(a, e):
    result = _ONE
    base = a
    while e > _ZERO:
        if e & _ONE:
            result = mulmod(result, base)
        base = mulmod(base, base)
        e = e >> _ONE
    return result


def mulmod_vec(a, b):
    """Elementwise ``mulmod`` on uint64 arrays (broadcasting)."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    a1 = a >> _S32
    a0 = a & _LOW32
    b1 = b >> _S32
    b0 = b & _LOW32
    mid = a1 * b0 + a0 * b1
    lo = a0 * b0
    t = ((a1 * b1) << _S3) + (mid >> _S29) + ((mid & _LOW29) << _S32) + (lo & _P) + (lo >> _S61)
    t = (t & _P) + (t >> _S61)
    return np.where(t >= _P, t - _P, t)


@njit
def _rank_mod_p_loops(mat):
    a = mat.copy()
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        piv = -1
        for r in range(rank, rows):
            if a[r, c] != _ZERO:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for j in range(cols):
                tmp = a[piv, j]
                a[piv, j] = a[rank, j]
                a[rank, j] = tmp
        inv = powmod(a[rank, c], _P - np.uint64(2))
        for j in range(c, cols):
            a[rank, j] = mulmod(a[rank, j], inv)
        for r in range(rank + 1, rows):
            f = a[r, c]
            if f != _ZERO:
                for j in range(c, cols):
                    s = mulmod(f, a[rank, j])
                    v = a[r, j]
                    if v >= s:
                        a[r, j] = v - s
                    else:
                        a[r, j] = v + (_P - s)
        rank += 1
    return rank


def _rank_mod_p_numpy(mat):
    a = np.array(mat, dtype=np.uint64, copy=True)
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.flatnonzero(a[rank:, c])
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        inv = _python_powmod(int(a[rank, c]))
        a[rank, c:] = mulmod_vec(a[rank, c:], np.uint64(inv))
        below = rank + 1 + np.flatnonzero(a[rank + 1:, c])
        if below.size:
            s = mulmod_vec(a[below, c][:, None], a[rank, c:][None, :])
            v = a[below, c:]
            a[below, c:] = np.where(v >= s, v - s, v + (_P - s))
        rank += 1
    return rank


def _python_powmod(x):
    return pow(x, MERSENNE61 - 2, MERSENNE61)


def rank_mod_p(mat):
    """Rank of a uint64 matrix (entries already reduced) over F_(2^61-1)."""
    mat = np.ascontiguousarray(mat, dtype=np.uint64)
    if mat.size == 0:
        return 0
    if USE_NUMBA:
        return int(_rank_mod_p_loops(mat))
    return _rank_mod_p_numpy(mat)


rank_mod_p_numpy = _rank_mod_p_numpy
rank_mod_p_loops = _rank_mod_p_loops

"""numba kernels behind SubspaceBasis.

All bit manipulation stays in uint64; mixing uint64 with int64 in numba
silently promotes to float64, hence the explicit ``_U`` casts.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_U = np.uint64
_ONE = np.uint64(1)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(cache=True, inline="always")
def popcount64(x):
    x = x - ((x >> _U(1)) & _M1)
    x = (x & _M2) + ((x >> _U(2)) & _M2)
    x = (x + (x >> _U(4))) & _M4
    return np.int64((x * _H01) >> _U(56))


@njit(cache=True, inline="always")
def bit(p):
    return _ONE << _U(p)


@njit(cache=True, inline="always")
def phase(bits, p, q):
    lo = min(p, q)
    hi = max(p, q)
    mask = (bit(hi) - _ONE) & ~(bit(lo + 1) - _ONE)
    return -1.0 if popcount64(bits & mask) & 1 else 1.0


@njit(cache=True)
def occupation_table(strings, norb, nelec):
    """Occupied orbital indices per string, ascending; shape (n, nelec)."""
    out = np.empty((strings.size, nelec), dtype=np.int64)
    for i in range(strings.size):
        k = 0
        for p in range(norb):
            if strings[i] & bit(p):
                out[i, k] = p
                k += 1
    return out


@njit(cache=True, inline="always")
def search_sorted(arr, lo, hi, value):
    """Index of ``value`` in sorted ``arr[lo:hi]`` or -1."""
    while lo < hi:
        mid = (lo + hi) >> 1
        v = arr[mid]
        if v < value:
            lo = mid + 1
        elif v > value:
            hi = mid
        else:
            return mid
    return -1


@njit(cache=True)
def single_links(strings, norb):
    """CSR table of single excitations p->q landing inside ``strings``.

    Returns (ptr, target, p, q, sign).
    """
    n = strings.size
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        s = strings[i]
        c = 0
        for p in range(norb):
            if not (s & bit(p)):
                continue
            for q in range(norb):
                if s & bit(q):
                    continue
                t = s ^ bit(p) ^ bit(q)
                if search_sorted(strings, 0, n, t) >= 0:
                    c += 1
        counts[i + 1] = c
    ptr = np.cumsum(counts)
    tot = ptr[n]
    tgt = np.empty(tot, dtype=np.int64)
    pp = np.empty(tot, dtype=np.int64)
    qq = np.empty(tot, dtype=np.int64)
    sg = np.empty(tot, dtype=np.float64)
    for i in range(n):
        s = strings[i]
        e = ptr[i]
        for p in range(norb):
            if not (s & bit(p)):
                continue
            for q in range(norb):
                if s & bit(q):
                    continue
                t = s ^ bit(p) ^ bit(q)
                j = search_sorted(strings, 0, n, t)
                if j >= 0:
                    tgt[e] = j
                    pp[e] = p
                    qq[e] = q
                    sg[e] = phase(s, p, q)
                    e += 1
    return ptr, tgt, pp, qq, sg


@njit(cache=True)
def _double_scan(strings, norb, ptr, tgt, orbs, sg, fill):
    n = strings.size
    for i in range(n):
        s = strings[i]
        c = 0
        for p1 in range(norb):
            if not (s & bit(p1)):
                continue
            for p2 in range(p1 + 1, norb):
                if not (s & bit(p2)):
                    continue
                for q1 in range(norb):
                    if s & bit(q1):
                        continue
                    for q2 in range(q1 + 1, norb):
                        if s & bit(q2):
                            continue
                        t = s ^ bit(p1) ^ bit(p2) ^ bit(q1) ^ bit(q2)
                        j = search_sorted(strings, 0, n, t)
                        if j < 0:
                            continue
                        if fill:
                            e = ptr[i] + c
                            mid = s ^ bit(p2) ^ bit(q2)
                            tgt[e] = j
                            orbs[e, 0] = p1
                            orbs[e, 1] = p2
                            orbs[e, 2] = q1
                            orbs[e, 3] = q2
                            sg[e] = phase(s, p2, q2) * phase(mid, p1, q1)
                        c += 1
        if not fill:
            ptr[i + 1] = c


@njit(cache=True)
def double_links(strings, norb):
    """CSR table of same-spin double excitations (p1<p2 -> q1<q2) inside ``strings``.

    Returns (ptr, target, orbs[:, (p1, p2, q1, q2)], sign) with the sign of
    E_{q1 p1} E_{q2 p2} acting on the source string.
    """
    n = strings.size
    counts = np.zeros(n + 1, dtype=np.int64)
    tgt = np.empty(0, dtype=np.int64)
    orbs = np.empty((0, 4), dtype=np.int64)
    sg = np.empty(0, dtype=np.float64)
    _double_scan(strings, norb, counts, tgt, orbs, sg, False)
    ptr = np.cumsum(counts)
    tot = ptr[n]
    tgt = np.empty(tot, dtype=np.int64)
    orbs = np.empty((tot, 4), dtype=np.int64)
    sg = np.empty(tot, dtype=np.float64)
    _double_scan(strings, norb, ptr, tgt, orbs, sg, True)
    return ptr, tgt, orbs, sg


@njit(cache=True)
def spin_diagonal(occ, h, eri4):
    """Per-string one-spin energy: sum h_pp + 1/2 sum_{p,q} [(pp|qq) - (pq|qp)]."""
    out = np.zeros(occ.shape[0])
    k = occ.shape[1]
    for i in range(occ.shape[0]):
        e = 0.0
        for a in range(k):
            p = occ[i, a]
            e += h[p, p]
            for b in range(a + 1, k):
                q = occ[i, b]
                e += eri4[p, p, q, q] - eri4[p, q, q, p]
        out[i] = e
    return out


@njit(parallel=True, cache=True)
def config_diagonal(cfg_a, cfg_b, occ_a, occ_b, ea, eb, eri4, e_core):
    n = cfg_a.size
    out = np.empty(n)
    for x in prange(n):
        ia = cfg_a[x]
        ib = cfg_b[x]
        e = e_core + ea[ia] + eb[ib]
        for a in range(occ_a.shape[1]):
            p = occ_a[ia, a]
            for b in range(occ_b.shape[1]):
                q = occ_b[ib, b]
                e += eri4[p, p, q, q]
        out[x] = e
    return out


@njit(cache=True, inline="always")
def _find(row_ptr, col_b, table, use_table, ia, ib):
    if use_table:
        return table[ia, ib]
    return search_sorted(col_b, row_ptr[ia], row_ptr[ia + 1], ib)


@njit(cache=True, inline="always")
def _single_value(p, q, sgn, occ_same, occ_other, h, eri4):
    v = h[p, q]
    for a in range(occ_same.size):
        r = occ_same[a]
        v += eri4[p, q, r, r] - eri4[p, r, r, q]
    for a in range(occ_other.size):
        r = occ_other[a]
        v += eri4[p, q, r, r]
    return sgn * v


@njit(parallel=True, cache=True)
def matvec(
    V, W, diag, cfg_a, cfg_b, row_ptr, col_b, table, use_table,
    sa_ptr, sa_tgt, sa_p, sa_q, sa_sg,
    sb_ptr, sb_tgt, sb_p, sb_q, sb_sg,
    da_ptr, da_tgt, da_orb, da_sg,
    db_ptr, db_tgt, db_orb, db_sg,
    occ_a, occ_b, h, eri4,
):
    """W = H V row by row (gather form): each row sums its own connections in a
    fixed order, so the result does not depend on the thread count."""
    n = V.shape[0]
    k = V.shape[1]
    for x in prange(n):
        ia = cfg_a[x]
        ib = cfg_b[x]
        oa = occ_a[ia]
        ob = occ_b[ib]
        for c in range(k):
            W[x, c] = diag[x] * V[x, c]
        # alpha singles
        for e in range(sa_ptr[ia], sa_ptr[ia + 1]):
            y = _find(row_ptr, col_b, table, use_table, sa_tgt[e], ib)
            if y < 0:
                continue
            v = _single_value(sa_p[e], sa_q[e], sa_sg[e], oa, ob, h, eri4)
            for c in range(k):
                W[x, c] += v * V[y, c]
        # beta singles
        for e in range(sb_ptr[ib], sb_ptr[ib + 1]):
            y = _find(row_ptr, col_b, table, use_table, ia, sb_tgt[e])
            if y < 0:
                continue
            v = _single_value(sb_p[e], sb_q[e], sb_sg[e], ob, oa, h, eri4)
            for c in range(k):
                W[x, c] += v * V[y, c]
        # same-spin doubles
        for e in range(da_ptr[ia], da_ptr[ia + 1]):
            y = _find(row_ptr, col_b, table, use_table, da_tgt[e], ib)
            if y < 0:
                continue
            p1 = da_orb[e, 0]
            p2 = da_orb[e, 1]
            q1 = da_orb[e, 2]
            q2 = da_orb[e, 3]
            v = da_sg[e] * (eri4[q1, p1, q2, p2] - eri4[q1, p2, q2, p1])
            for c in range(k):
                W[x, c] += v * V[y, c]
        for e in range(db_ptr[ib], db_ptr[ib + 1]):
            y = _find(row_ptr, col_b, table, use_table, ia, db_tgt[e])
            if y < 0:
                continue
            p1 = db_orb[e, 0]
            p2 = db_orb[e, 1]
            q1 = db_orb[e, 2]
            q2 = db_orb[e, 3]
            v = db_sg[e] * (eri4[q1, p1, q2, p2] - eri4[q1, p2, q2, p1])
            for c in range(k):
                W[x, c] += v * V[y, c]
        # opposite-spin doubles composed from the two singles tables
        for ea in range(sa_ptr[ia], sa_ptr[ia + 1]):
            ja = sa_tgt[ea]
            lo = row_ptr[ja]
            hi = row_ptr[ja + 1]
            if lo == hi:
                continue
            p = sa_p[ea]
            q = sa_q[ea]
            sa = sa_sg[ea]
            for eb in range(sb_ptr[ib], sb_ptr[ib + 1]):
                jb = sb_tgt[eb]
                if use_table:
                    y = table[ja, jb]
                else:
                    y = search_sorted(col_b, lo, hi, jb)
                if y < 0:
                    continue
                v = sa * sb_sg[eb] * eri4[p, q, sb_p[eb], sb_q[eb]]
                for c in range(k):
                    W[x, c] += v * V[y, c]


@njit(cache=True)
def locate(alpha_strings, beta_strings, row_ptr, col_b, qa, qb):
    """Basis position of each (qa, qb) pair of raw strings, -1 when absent."""
    out = np.empty(qa.size, dtype=np.int64)
    na = alpha_strings.size
    nb = beta_strings.size
    for i in range(qa.size):
        ia = search_sorted(alpha_strings, 0, na, qa[i])
        ib = search_sorted(beta_strings, 0, nb, qb[i])
        if ia < 0 or ib < 0:
            out[i] = -1
        else:
            out[i] = search_sorted(col_b, row_ptr[ia], row_ptr[ia + 1], ib)
    return out


@njit(cache=True)
def single_neighbours(alphas, betas, norb):
    """All single-excitation partners (both spins) of each configuration."""
    n = alphas.size
    counts = np.zeros(n + 1, dtype=np.int64)
    for x in range(n):
        na = popcount64(alphas[x])
        nb = popcount64(betas[x])
        counts[x + 1] = na * (norb - na) + nb * (norb - nb)
    ptr = np.cumsum(counts)
    out = np.empty((ptr[n], 2), dtype=np.uint64)
    for x in range(n):
        e = ptr[x]
        for spin in range(2):
            s = alphas[x] if spin == 0 else betas[x]
            for p in range(norb):
                if not (s & bit(p)):
                    continue
                for q in range(norb):
                    if s & bit(q):
                        continue
                    t = s ^ bit(p) ^ bit(q)
                    if spin == 0:
                        out[e, 0] = t
                        out[e, 1] = betas[x]
                    else:
                        out[e, 0] = alphas[x]
                        out[e, 1] = t
                    e += 1
    return ptr, out


@njit(cache=True)
def single_neighbour_values(alphas, betas, norb, h, eri4):
    """Matrix elements matching the rows produced by ``single_neighbours``."""
    n = alphas.size
    total = 0
    for x in range(n):
        na = popcount64(alphas[x])
        nb = popcount64(betas[x])
        total += na * (norb - na) + nb * (norb - nb)
    out = np.empty(total)
    occ_s = np.empty(norb, dtype=np.int64)
    occ_o = np.empty(norb, dtype=np.int64)
    e = 0
    for x in range(n):
        for spin in range(2):
            s = alphas[x] if spin == 0 else betas[x]
            o = betas[x] if spin == 0 else alphas[x]
            ns = 0
            no = 0
            for p in range(norb):
                if s & bit(p):
                    occ_s[ns] = p
                    ns += 1
                if o & bit(p):
                    occ_o[no] = p
                    no += 1
            for p in range(norb):
                if not (s & bit(p)):
                    continue
                for q in range(norb):
                    if s & bit(q):
                        continue
                    out[e] = _single_value(p, q, phase(s, p, q), occ_s[:ns], occ_o[:no], h, eri4)
                    e += 1
    return out

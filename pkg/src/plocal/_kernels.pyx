# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: GF(2) row reduction on packed bitset rows and
subgroup closure over a dense multiplication table.

Both have pure-Python twins in plocal.gf2 / plocal.groups; the accelerated
variants must return bit-identical results.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def gf2_eliminate(cnp.ndarray[cnp.uint64_t, ndim=2] rows, Py_ssize_t ncols):
    """Row-reduce packed GF(2) rows in place (row echelon, leading bits unique).

    Returns (rank, pivot column list).  Rows are packed little-endian:
    column c lives in word c >> 6, bit c & 63.
    """
    cdef Py_ssize_t nrows = rows.shape[0]
    cdef Py_ssize_t nwords = rows.shape[1]
    cdef Py_ssize_t r, i, w, c
    cdef unsigned long long bit
    cdef list pivots = []
    cdef Py_ssize_t rank = 0
    for c in range(ncols):
        w = c >> 6
        bit = (<unsigned long long>1) << (c & 63)
        r = -1
        for i in range(rank, nrows):
            if rows[i, w] & bit:
                r = i
                break
        if r < 0:
            continue
        if r != rank:
            for i in range(nwords):
                rows[rank, i], rows[r, i] = rows[r, i], rows[rank, i]
        for i in range(nrows):
            if i != rank and (rows[i, w] & bit):
                for r in range(nwords):
                    rows[i, r] ^= rows[rank, r]
        pivots.append(c)
        rank += 1
        if rank == nrows:
            break
    return rank, pivots


def gf2_rank_destructive(cnp.ndarray[cnp.uint64_t, ndim=2] rows, Py_ssize_t ncols):
    """Rank only, no full reduction bookkeeping (fast path)."""
    cdef Py_ssize_t nrows = rows.shape[0]
    cdef Py_ssize_t nwords = rows.shape[1]
    cdef Py_ssize_t rank = 0, i, j, w, c
    cdef unsigned long long bit
    for c in range(ncols):
        w = c >> 6
        bit = (<unsigned long long>1) << (c & 63)
        i = -1
        for j in range(rank, nrows):
            if rows[j, w] & bit:
                i = j
                break
        if i < 0:
            continue
        if i != rank:
            for j in range(nwords):
                rows[rank, j], rows[i, j] = rows[i, j], rows[rank, j]
        for j in range(rank + 1, nrows):
            if rows[j, w] & bit:
                for i in range(nwords):
                    rows[j, i] ^= rows[rank, i]
        rank += 1
        if rank == nrows:
            break
    return rank


def closure_indices(cnp.ndarray[cnp.int32_t, ndim=2] table, seed):
    """Subgroup closure of seed indices under the dense multiplication table.

    Table rows/cols are element indices; table[i, j] = index of product.
    Returns a sorted list of member indices.
    """
    cdef Py_ssize_t n = table.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] member = np.zeros(n, dtype=np.uint8)
    cdef list elems = [0]
    cdef list frontier = []
    cdef Py_ssize_t g, h, p, k
    member[0] = 1
    for g in seed:
        if not member[g]:
            member[g] = 1
            elems.append(g)
            frontier.append(g)
    cdef Py_ssize_t fi = 0
    while fi < len(frontier):
        g = frontier[fi]
        fi += 1
        k = len(elems)
        for h in range(k):
            p = table[g, elems[h]]
            if not member[p]:
                member[p] = 1
                elems.append(p)
                frontier.append(p)
            p = table[elems[h], g]
            if not member[p]:
                member[p] = 1
                elems.append(p)
                frontier.append(p)
    elems.sort()
    return elems

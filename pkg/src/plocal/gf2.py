"""GF(2) linear algebra on int bitsets, with an optional compiled fast path.

Rows are Python ints used as bitsets (bit c = column c).  The compiled
kernel in plocal._kernels works on uint64-packed numpy arrays; both paths
produce identical ranks, pivots and reduced rows.
"""

from __future__ import annotations

import numpy as np

try:  # compiled core, optional
    from plocal import _kernels as _K
except ImportError:  # pragma: no cover - depends on build environment
    _K = None

HAVE_KERNELS = _K is not None

# Below this many (rows * words) the packing overhead beats the C gain.
_ACCEL_CUTOFF = 1 << 14


def _pack(rows: list[int], ncols: int) -> np.ndarray:
    nwords = max(1, (ncols + 63) >> 6)
    out = np.zeros((len(rows), nwords), dtype=np.uint64)
    mask = (1 << 64) - 1
    for i, r in enumerate(rows):
        w = 0
        while r:
            out[i, w] = r & mask
            r >>= 64
            w += 1
    return out


def _unpack(arr: np.ndarray) -> list[int]:
    out = []
    for i in range(arr.shape[0]):
        v = 0
        for w in range(arr.shape[1] - 1, -1, -1):
            v = (v << 64) | int(arr[i, w])
        out.append(v)
    return out


def _eliminate_py(rows: list[int], ncols: int) -> tuple[list[int], list[int]]:
    work = rows[:]
    pivots = []
    rank = 0
    for c in range(ncols):
        bit = 1 << c
        pivot = None
        for r in range(rank, len(work)):
            if work[r] & bit:
                pivot = r
                break
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        for r in range(len(work)):
            if r != rank and (work[r] & bit):
                work[r] ^= work[rank]
        pivots.append(c)
        rank += 1
        if rank == len(work):
            break
    return work, pivots


def eliminate(rows: list[int], ncols: int) -> tuple[list[int], list[int]]:
    """Full row reduction; returns (reduced rows, pivot columns)."""
    if _K is not None and len(rows) * max(1, ncols >> 6) >= _ACCEL_CUTOFF:
        packed = _pack(rows, ncols)
        _rank, pivots = _K.gf2_eliminate(packed, ncols)
        return _unpack(packed), list(pivots)
    return _eliminate_py(rows, ncols)


def rank(rows: list[int], ncols: int) -> int:
    if _K is not None and len(rows) * max(1, ncols >> 6) >= _ACCEL_CUTOFF:
        return int(_K.gf2_rank_destructive(_pack(rows, ncols), ncols))
    work = rows[:]
    r = 0
    for c in range(ncols):
        bit = 1 << c
        pivot = None
        for i in range(r, len(work)):
            if work[i] & bit:
                pivot = i
                break
        if pivot is None:
            continue
        work[r], work[pivot] = work[pivot], work[r]
        for i in range(r + 1, len(work)):
            if work[i] & bit:
                work[i] ^= work[r]
        r += 1
        if r == len(work):
            break
    return r


def nullspace(rows: list[int], ncols: int) -> list[int]:
    """Basis of the right kernel {v : for every row r, parity(r & v) = 0}.

    Rows are vectors of length ncols; returns kernel vectors as bitsets.
    """
    reduced, pivots = eliminate(rows, ncols)
    reduced = [r for r in reduced if r]
    pivot_set = set(pivots)
    free = [c for c in range(ncols) if c not in pivot_set]
    basis = []
    for f in free:
        v = 1 << f
        # back-substitute: pivot row i forces coordinate pivots[i]
        for i, row in enumerate(reduced):
            if (row >> f) & 1:
                v |= 1 << pivots[i]
        basis.append(v)
    return basis


def in_rowspan(vec: int, reduced: list[int], pivots: list[int]) -> bool:
    v = vec
    for row, p in zip(reduced, pivots):
        if (v >> p) & 1:
            v ^= row
    return v == 0


def solve(rows: list[int], ncols: int, target: int) -> int | None:
    """One solution x (as bitset over row indices) of x^T * rows = target."""
    # Transpose trick: solve over the row space by augmenting each row
    # with an indicator of its index.  Indicator bits live beyond ncols,
    # so elimination never pivots on them.
    n = len(rows)
    aug = [rows[i] | (1 << (ncols + i)) for i in range(n)]
    reduced, pivots = _eliminate_py(aug, ncols)
    v = target
    combo = 0
    for row, p in zip(reduced, pivots):
        if (v >> p) & 1:
            v ^= row & ((1 << ncols) - 1)
            combo ^= row >> ncols
    if v != 0:
        return None
    return combo

"""Exact linear algebra: integer Smith normal form and GF(p) elimination.

Everything is integer arithmetic; no floating point.  GF(2) work is
routed through the bitset kernels in plocal.gf2.
"""

from __future__ import annotations

from plocal import gf2


def smith_normal_form(mat: list[list[int]]):
    """U * A * V = D with U, V unimodular and D in Smith normal form.

    Returns (D, U, V) as lists of lists.  Pivoting always selects a
    smallest-magnitude nonzero entry, which keeps coefficient growth in
    check at this scale.
    """
    m = len(mat)
    n = len(mat[0]) if m else 0
    A = [row[:] for row in mat]
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def row_op(i, j, c):  # row_i -= c * row_j
        A[i] = [a - c * b for a, b in zip(A[i], A[j])]
        U[i] = [a - c * b for a, b in zip(U[i], U[j])]

    def col_op(i, j, c):  # col_i -= c * col_j
        for r in range(m):
            A[r][i] -= c * A[r][j]
        for r in range(n):
            V[r][i] -= c * V[r][j]

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for r in range(m):
            A[r][i], A[r][j] = A[r][j], A[r][i]
        for r in range(n):
            V[r][i], V[r][j] = V[r][j], V[r][i]

    t = 0
    while t < min(m, n):
        # locate smallest nonzero entry in the remaining block
        best = None
        for i in range(t, m):
            for j in range(t, n):
                if A[i][j] and (best is None or abs(A[i][j]) < abs(A[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        swap_rows(t, best[0])
        swap_cols(t, best[1])
        dirty = False
        for i in range(t + 1, m):
            if A[i][t]:
                q = A[i][t] // A[t][t]
                row_op(i, t, q)
                if A[i][t]:
                    dirty = True
        for j in range(t + 1, n):
            if A[t][j]:
                q = A[t][j] // A[t][t]
                col_op(j, t, q)
                if A[t][j]:
                    dirty = True
        if dirty:
            continue
        # divisibility pass: pivot must divide the rest of the block
        offender = None
        for i in range(t + 1, m):
            for j in range(t + 1, n):
                if A[i][j] % A[t][t]:
                    offender = i
                    break
            if offender is not None:
                break
        if offender is not None:
            row_op(t, offender, -1)
            continue
        if A[t][t] < 0:
            A[t] = [-v for v in A[t]]
            U[t] = [-v for v in U[t]]
        t += 1
    return A, U, V


def elementary_divisors(mat: list[list[int]]) -> list[int]:
    D, _, _ = smith_normal_form(mat)
    out = []
    for i in range(min(len(D), len(D[0]) if D else 0)):
        if D[i][i]:
            out.append(abs(D[i][i]))
    return out


def integer_kernel_basis(mat: list[list[int]]) -> list[list[int]]:
    """Basis of the saturated kernel lattice {v in Z^n : A v = 0}."""
    m = len(mat)
    n = len(mat[0]) if m else 0
    if m == 0:
        return [[int(i == j) for j in range(n)] for i in range(n)]
    D, _, V = smith_normal_form(mat)
    rank = sum(1 for i in range(min(m, n)) if D[i][i])
    return [[V[r][j] for r in range(n)] for j in range(rank, n)]


# -- dense GF(p) elimination --------------------------------------------


class ModPMatrix:
    """Row-major matrix over GF(p), p prime; p = 2 delegates to bitsets."""

    def __init__(self, rows: list[list[int]], ncols: int, p: int):
        self.p = p
        self.ncols = ncols
        self.rows = [[v % p for v in row] for row in rows]

    def rank(self) -> int:
        if self.p == 2:
            packed = [rowbits(row) for row in self.rows]
            return gf2.rank(packed, self.ncols)
        return len(self._echelon()[0])

    def _echelon(self):
        p = self.p
        work = [row[:] for row in self.rows]
        pivots = []
        r = 0
        for c in range(self.ncols):
            piv = None
            for i in range(r, len(work)):
                if work[i][c] % p:
                    piv = i
                    break
            if piv is None:
                continue
            work[r], work[piv] = work[piv], work[r]
            inv = pow(work[r][c], -1, p)
            work[r] = [(v * inv) % p for v in work[r]]
            for i in range(len(work)):
                if i != r and work[i][c]:
                    f = work[i][c]
                    work[i] = [(a - f * b) % p for a, b in zip(work[i], work[r])]
            pivots.append(c)
            r += 1
            if r == len(work):
                break
        return pivots, work[: len(pivots)]

    def nullspace(self) -> list[list[int]]:
        if self.p == 2:
            packed = [rowbits(row) for row in self.rows]
            return [bitsrow(v, self.ncols) for v in gf2.nullspace(packed, self.ncols)]
        pivots, ech = self._echelon()
        pivot_set = set(pivots)
        free = [c for c in range(self.ncols) if c not in pivot_set]
        basis = []
        for f in free:
            v = [0] * self.ncols
            v[f] = 1
            for i, row in enumerate(ech):
                v[pivots[i]] = (-row[f]) % self.p
            basis.append(v)
        return basis


def rowbits(row: list[int]) -> int:
    v = 0
    for i, x in enumerate(row):
        if x & 1:
            v |= 1 << i
    return v


def bitsrow(v: int, n: int) -> list[int]:
    return [(v >> i) & 1 for i in range(n)]

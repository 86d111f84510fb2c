"""Bar-resolution cohomology of finite groups with finite p-torsion
coefficients, restriction maps, fusion-stable elements, and the
two-variable second-page modules attached to a strongly closed subgroup.

Cochains live on the normalized bar complex (tuples avoiding the
identity).  Two exact arithmetic paths: prime-field coefficients go
through packed GF(p) elimination (bitsets at p = 2, the compiled kernel
when built); general Z/p^k coefficients go through integer Smith normal
form on the lifted lattices.  No floating point anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from plocal import gf2
from plocal.groups import IndexedGroup
from plocal.linalg import (
    ModPMatrix,
    bitsrow,
    elementary_divisors,
    integer_kernel_basis,
    rowbits,
    smith_normal_form,
)

DEFAULT_ORDER_CAP = 64
DEFAULT_DEGREE_CAP = 3


class CohomologyCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class CoefficientModule:
    """Finite abelian p-group ⊕_j Z/p^(k_j), optionally with an action of
    a finite group given by one integer matrix per element."""

    p: int
    exponents: tuple[int, ...]
    action: dict | None = None  # element index -> matrix (tuple of rows)

    @property
    def rank(self) -> int:
        return len(self.exponents)

    def moduli(self) -> list[int]:
        return [self.p**k for k in self.exponents]

    def is_prime_field(self) -> bool:
        return all(k == 1 for k in self.exponents)

    def is_trivial_action(self) -> bool:
        if self.action is None:
            return True
        ident = tuple(
            tuple(int(i == j) for j in range(self.rank)) for i in range(self.rank)
        )
        return all(
            _mat_mod(m, mod) == _mat_mod(ident, mod)
            for m, mod in ((mm, self.p ** max(self.exponents)) for mm in self.action.values())
        )

    def matrix(self, g: int):
        if self.action is None:
            return None
        return self.action[g]


def _mat_mod(m, mod):
    return tuple(tuple(v % mod for v in row) for row in m)


def trivial_module(p: int, k: int = 1, rank: int = 1) -> CoefficientModule:
    return CoefficientModule(p, (k,) * rank)


def module_with_action(G: IndexedGroup, p: int, exponents, gen_matrices: dict) -> CoefficientModule:
    """Build the full action from matrices on a generating set and check
    it respects the multiplication table and the coordinate moduli."""
    exponents = tuple(exponents)
    r = len(exponents)
    mods = [p**k for k in exponents]
    ident = tuple(tuple(int(i == j) for j in range(r)) for i in range(r))
    action = {0: ident}
    frontier = [0]
    while frontier:
        g = frontier.pop(0)
        for s, mat in gen_matrices.items():
            h = G.mul(s, g)
            if h not in action:
                action[h] = _mat_mul(mat, action[g], mods)
                frontier.append(h)
    if len(action) != G.order:
        raise ValueError("generator matrices do not reach the whole group")
    for a in range(G.order):
        for b in range(G.order):
            if action[G.mul(a, b)] != _mat_mul(action[a], action[b], mods):
                raise ValueError("matrices do not define a group action")
    return CoefficientModule(p, exponents, action)


def _mat_mul(A, B, mods):
    r = len(mods)
    out = []
    for i in range(r):
        row = []
        for j in range(r):
            s = sum(A[i][k] * B[k][j] for k in range(r))
            row.append(s % mods[i])
        out.append(tuple(row))
    return tuple(out)


# -- the normalized bar complex -------------------------------------------


class BarComplex:
    """C^n = maps (G \\ 1)^n -> M with the usual alternating coboundary."""

    def __init__(self, G: IndexedGroup, M: CoefficientModule,
                 order_cap: int = DEFAULT_ORDER_CAP,
                 degree_cap: int = DEFAULT_DEGREE_CAP):
        if G.order > order_cap:
            raise CohomologyCapError(f"group order {G.order} above cap {order_cap}")
        self.G = G
        self.M = M
        self.degree_cap = degree_cap
        self.nontrivial = list(range(1, G.order))
        self._basis: dict = {}
        self._index: dict = {}
        self._d_rows: dict = {}

    def basis(self, n: int):
        if n not in self._basis:
            if n > self.degree_cap + 1:
                raise CohomologyCapError(f"degree {n} above cap {self.degree_cap}")
            tuples = list(iproduct(self.nontrivial, repeat=n))
            self._basis[n] = tuples
            self._index[n] = {t: i for i, t in enumerate(tuples)}
        return self._basis[n]

    def dim(self, n: int) -> int:
        return len(self.basis(n)) * self.M.rank

    def coordinate(self, n: int, t: tuple, j: int) -> int:
        return self._index[n][t] * self.M.rank + j

    def d_entries(self, n: int):
        """Sparse coboundary C^n -> C^(n+1): list per output coordinate of
        (input coordinate, integer coefficient)."""
        key = n
        if key in self._d_rows:
            return self._d_rows[key]
        G, M = self.G, self.M
        r = M.rank
        self.basis(n)
        out_basis = self.basis(n + 1)
        rows = []
        for t in out_basis:
            for j in range(r):
                entries = []
                # leading term g1 . f(g2..g_{n+1}): coefficient action matrix
                rest = t[1:]
                if n == 0 or all(x != 0 for x in rest):
                    if M.action is None:
                        if n == 0:
                            entries.append((0 * r + j, 1))
                        else:
                            entries.append((self.coordinate(n, rest, j), 1))
                    else:
                        mat = M.action[t[0]]
                        for jj in range(r):
                            c = mat[j][jj]
                            if c % (M.p ** max(M.exponents)):
                                if n == 0:
                                    entries.append((jj, c))
                                else:
                                    entries.append((self.coordinate(n, rest, jj), c))
                # middle terms
                for i in range(1, n + 1):
                    g = G.mul(t[i - 1], t[i])
                    if g == 0:
                        continue
                    merged = t[: i - 1] + (g,) + t[i + 1 :]
                    entries.append(
                        (self.coordinate(n, merged, j), (-1) ** i)
                    )
                # last face
                head = t[:n]
                if n == 0 or all(x != 0 for x in head):
                    coord = j if n == 0 else self.coordinate(n, head, j)
                    entries.append((coord, (-1) ** (n + 1)))
                rows.append(entries)
        self._d_rows[key] = rows
        return rows


@dataclass
class CohomologyGroup:
    """ker d_n / im d_{n-1} with explicit cocycle coset representatives."""

    degree: int
    invariants: list[int]
    basis: list  # representative cochain vectors (list[int] over coordinates)
    complex: BarComplex
    _reduce: object = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.invariants)

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(repr((self.degree, self.invariants, self.basis)).encode())
        return h.hexdigest()[:16]


def bar_cohomology(G: IndexedGroup, M: CoefficientModule, n: int,
                   order_cap: int = DEFAULT_ORDER_CAP,
                   degree_cap: int = DEFAULT_DEGREE_CAP) -> CohomologyGroup:
    cx = BarComplex(G, M, order_cap, degree_cap)
    return cohomology_of(cx, n)


def cohomology_of(cx: BarComplex, n: int) -> CohomologyGroup:
    if cx.M.is_prime_field():
        return _cohomology_field(cx, n)
    return _cohomology_lattice(cx, n)


def _d_matrix_rows_field(cx: BarComplex, n: int, p: int):
    """Coboundary as dense rows over GF(p) (bitsets when p = 2)."""
    rows = cx.d_entries(n)
    ncols = cx.dim(n)
    if p == 2:
        out = []
        for entries in rows:
            v = 0
            for c, coeff in entries:
                if coeff % 2:
                    v ^= 1 << c
            out.append(v)
        return out, ncols
    out = []
    for entries in rows:
        v = [0] * ncols
        for c, coeff in entries:
            v[c] = (v[c] + coeff) % p
        out.append(v)
    return out, ncols


def _cohomology_field(cx: BarComplex, n: int) -> CohomologyGroup:
    p = cx.M.p
    d_n, ncols = _d_matrix_rows_field(cx, n, p)
    if n == 0:
        prev_rows = []
    else:
        prev_rows, _ = _d_matrix_rows_field(cx, n - 1, p)
    if p == 2:
        # rows of d_n are output coordinates; kernel of d_n = vectors
        # orthogonal-in-the-evaluation-sense: treat d_n as a matrix acting
        # on C^n: each output row is a linear functional.
        cocycles = gf2.nullspace(d_n, ncols)
        # image of d_{n-1}: columns of the previous map = images of the
        # standard basis of C^{n-1}
        img = _image_vectors_gf2(prev_rows, cx.dim(n - 1) if n else 0, ncols)
        reduced, pivots = gf2.eliminate(img, ncols)
        reduced = [r for r in reduced if r]
        reps = []
        for z in cocycles:
            v = z
            for row, piv in zip(reduced, pivots):
                if (v >> piv) & 1:
                    v ^= row
            if v:
                reps.append(v)
        # echelon-reduce representatives among themselves
        rep_red, rep_piv = gf2.eliminate(reps, ncols)
        basis = [bitsrow(v, ncols) for v in rep_red if v]
        checker = _CosetCheckerGF2(d_n, ncols, reduced, pivots)
        return CohomologyGroup(n, [p] * len(basis), basis, cx, checker)
    mat = ModPMatrix(d_n, ncols, p)
    cocycles = mat.nullspace()
    img = _image_vectors_modp(prev_rows, cx.dim(n - 1) if n else 0, ncols, p)
    checker = _CosetCheckerModP(d_n, img, ncols, p)
    dim = (ncols - mat.rank()) - ModPMatrix(img, ncols, p).rank()
    basis = _complete_basis_modp(cocycles, img, ncols, p, dim)
    return CohomologyGroup(n, [p] * dim, basis, cx, checker)


def _image_vectors_gf2(prev_rows, prev_dim, ncols):
    cols = [0] * prev_dim
    for out_coord, v in enumerate(prev_rows):
        rest = v
        while rest:
            low = rest & (-rest)
            c = low.bit_length() - 1
            cols[c] |= 1 << out_coord
            rest ^= low
    return [c for c in cols if c]


def _image_vectors_modp(prev_rows, prev_dim, ncols, p):
    # prev_rows are functionals indexed by C^n-coordinates; the image of
    # d_{n-1} is spanned by their columns
    out = []
    for j in range(prev_dim):
        v = [0] * ncols
        for i, row in enumerate(prev_rows):
            if row[j]:
                v[i] = row[j] % p
        if any(v):
            out.append(v)
    return out


class _CosetCheckerGF2:
    def __init__(self, d_rows, ncols, img_reduced, img_pivots):
        self.d_rows = d_rows
        self.ncols = ncols
        self.img_reduced = img_reduced
        self.img_pivots = img_pivots

    def is_cocycle(self, vec_bits: int) -> bool:
        return all(bin(r & vec_bits).count("1") % 2 == 0 for r in self.d_rows)

    def reduce_bits(self, v: int) -> int:
        for row, piv in zip(self.img_reduced, self.img_pivots):
            if (v >> piv) & 1:
                v ^= row
        return v


class _CosetCheckerModP:
    def __init__(self, d_rows, img, ncols, p):
        self.d_rows = d_rows
        self.p = p
        self.ncols = ncols
        mat = ModPMatrix(img, ncols, p)
        self.pivots, self.ech = mat._echelon()

    def is_cocycle(self, v) -> bool:
        p = self.p
        return all(sum(r[i] * v[i] for i in range(self.ncols)) % p == 0 for r in self.d_rows)

    def reduce(self, v):
        p = self.p
        v = [x % p for x in v]
        for row, piv in zip(self.ech, self.pivots):
            if v[piv]:
                f = v[piv]
                v = [(a - f * b) % p for a, b in zip(v, row)]
        return v

    def in_coboundaries(self, v) -> bool:
        return not any(self.reduce(v))


def _complete_basis_modp(cocycles, img, ncols, p, dim):
    rows = [r[:] for r in img]
    base_rank = ModPMatrix(rows, ncols, p).rank()
    out = []
    for z in cocycles:
        if len(out) == dim:
            break
        cand = rows + [z]
        if ModPMatrix(cand, ncols, p).rank() > base_rank:
            rows = cand
            base_rank += 1
            out.append([x % p for x in z])
    return out


# -- Z/p^k lattice path ------------------------------------------------------


def _lattice_data(cx: BarComplex, n: int):
    """Integer matrices of d_{n-1} and d_n plus coordinate moduli."""
    mods_cur = cx.M.moduli() * len(cx.basis(n))
    d_n = _dense_int_matrix(cx, n)
    d_prev = _dense_int_matrix(cx, n - 1) if n > 0 else []
    mods_next = cx.M.moduli() * len(cx.basis(n + 1))
    return d_prev, d_n, mods_cur, mods_next


def _dense_int_matrix(cx: BarComplex, n: int):
    rows = cx.d_entries(n)
    ncols = cx.dim(n)
    out = []
    for entries in rows:
        v = [0] * ncols
        for c, coeff in entries:
            v[c] += coeff
        out.append(v)
    return out


def _cohomology_lattice(cx: BarComplex, n: int) -> CohomologyGroup:
    d_prev, d_n, mods_cur, mods_next = _lattice_data(cx, n)
    dim = len(mods_cur)
    # cocycle lattice: x with d_n x = 0 modulo target moduli
    K = _kernel_mod(d_n, mods_next, dim)
    # coboundary lattice generators: image columns of d_prev + moduli
    J = []
    if d_prev:
        prev_dim = len(d_prev[0])
        for j in range(prev_dim):
            J.append([d_prev[i][j] for i in range(dim)])
    for i, m in enumerate(mods_cur):
        v = [0] * dim
        v[i] = m
        J.append(v)
    invs, reps = _lattice_quotient(K, J, dim)
    return CohomologyGroup(n, invs, reps, cx)


def _kernel_mod(rows, mods_out, dim_in):
    """Generators of {x : rows·x ≡ 0 (per-row modulus)}."""
    if not rows:
        return [[int(i == j) for j in range(dim_in)] for i in range(dim_in)]
    m = len(rows)
    block = []
    for i, row in enumerate(rows):
        block.append(list(row) + [mods_out[i] if k == i else 0 for k in range(m)])
    kern = integer_kernel_basis(block)
    return [v[:dim_in] for v in kern]


def _lattice_quotient(K_gens, J_gens, dim):
    """Invariant factors (and representative vectors) of K/J, J ⊆ K."""
    if not K_gens:
        return [], []
    GK = [[K_gens[s][i] for s in range(len(K_gens))] for i in range(dim)]
    D, U, V = smith_normal_form(GK)
    r = min(len(D), len(D[0]) if D else 0)
    divisors = [D[i][i] for i in range(r) if D[i][i]]
    rank = len(divisors)
    Uinv = _int_inverse(U)
    basis = [
        [divisors[j] * Uinv[i][j] for i in range(dim)] for j in range(rank)
    ]
    # coordinates of J-generators in that basis
    coords = []
    for v in J_gens:
        uv = [sum(U[i][k] * v[k] for k in range(dim)) for i in range(dim)]
        c = []
        for j in range(rank):
            num = uv[j]
            if num % divisors[j]:
                raise ArithmeticError("coboundary outside the cocycle lattice")
            c.append(num // divisors[j])
        if any(uv[j] for j in range(rank, dim)):
            raise ArithmeticError("coboundary outside the cocycle lattice")
        coords.append(c)
    if not coords:
        return [0] * rank, basis
    mat = [[coords[s][j] for s in range(len(coords))] for j in range(rank)]
    Dq, Uq, _ = smith_normal_form(mat)
    invs = []
    reps = []
    Uq_inv = _int_inverse(Uq)
    for j in range(rank):
        d = Dq[j][j] if j < min(len(Dq), len(Dq[0]) if Dq else 0) else 0
        d = abs(d)
        if d == 1:
            continue
        vec = [0] * dim
        for i in range(rank):
            coeff = Uq_inv[i][j]
            for t in range(dim):
                vec[t] += coeff * basis[i][t]
        invs.append(d)
        reps.append(vec)
    keep = [(d, v) for d, v in zip(invs, reps) if d != 1]
    invs = [d for d, _ in keep]
    reps = [v for _, v in keep]
    return invs, reps


def _int_inverse(U):
    n = len(U)
    import fractions

    aug = [[fractions.Fraction(U[i][j]) for j in range(n)] + [
        fractions.Fraction(int(i == k)) for k in range(n)
    ] for i in range(n)]
    for c in range(n):
        piv = next(r for r in range(c, n) if aug[r][c] != 0)
        aug[c], aug[piv] = aug[piv], aug[c]
        f = aug[c][c]
        aug[c] = [x / f for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                g = aug[r][c]
                aug[r] = [x - g * y for x, y in zip(aug[r], aug[c])]
    out = [[int(aug[i][n + j]) for j in range(n)] for i in range(n)]
    return out


# -- restrictions -----------------------------------------------------------


def restriction_matrix(cxP: BarComplex, cxQ: BarComplex, n: int, hom: dict,
                       coeff_map=None):
    """Pullback C^n(Q) -> C^n(P) along a homomorphism P -> Q given by an
    index dict; optional coefficient matrix applied to values.

    Returns dense integer rows indexed by P-coordinates.
    """
    rP = cxP.M.rank
    rQ = cxQ.M.rank
    cxP.basis(n)
    cxQ.basis(n)
    dimQ = cxQ.dim(n)
    rows = []
    for t in cxP.basis(n):
        img = tuple(hom[x] for x in t)
        degenerate = any(x == 0 for x in img)
        for j in range(rP):
            row = [0] * dimQ
            if not degenerate:
                if coeff_map is None:
                    row[cxQ.coordinate(n, img, j)] = 1
                else:
                    for jj in range(rQ):
                        c = coeff_map[j][jj]
                        if c:
                            row[cxQ.coordinate(n, img, jj)] = c
            rows.append(row)
    return rows


def restrict_class(cls: CohomologyGroup, cxP: BarComplex, hom: dict,
                   coeff_map=None) -> list:
    """Images of the representative cocycles under the pullback."""
    n = cls.degree
    rows = restriction_matrix(cxP, cls.complex, n, hom, coeff_map)
    out = []
    for vec in cls.basis:
        img = [sum(r[i] * vec[i] for i in range(len(vec))) for r in rows]
        out.append(img)
    return out

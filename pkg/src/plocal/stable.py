"""Fusion-stable cohomology classes and the second-page modules of a
strongly closed subgroup.

Stability is imposed on the fusion system's generators and all of their
subgroup restrictions; this suffices because every morphism is a
composite of restrictions of generators and inner maps, inner maps act
trivially on cohomology, and the stability condition is closed under
composition and restriction.
"""

from __future__ import annotations

import numpy as np

from plocal import gf2
from plocal.cohomology import (
    BarComplex,
    CoefficientModule,
    CohomologyGroup,
    bar_cohomology,
    cohomology_of,
    restriction_matrix,
)
from plocal.fusion import FusionMorphism, FusionSystem
from plocal.groups import IndexedGroup
from plocal.linalg import ModPMatrix, bitsrow, rowbits
from plocal.ptoral import Subgroup


def indexed_subgroup(P: Subgroup) -> tuple[IndexedGroup, list]:
    """The subgroup as an IndexedGroup over its own sorted element list."""
    cached = P.__dict__.get("_indexed")
    if cached is None:
        amb = P.ambient
        els = list(P.elements)
        pos = {x: i for i, x in enumerate(els)}
        n = len(els)
        table = np.empty((n, n), dtype=np.int32)
        for i in range(n):
            for j in range(n):
                table[i, j] = pos[amb.mul(els[i], els[j])]
        cached = (IndexedGroup(table, labels=els), els)
        P.__dict__["_indexed"] = cached
    return cached


def _hom_index_map(src_els: list, dst_els: list, image_of: dict) -> dict:
    dst_pos = {x: i for i, x in enumerate(dst_els)}
    return {i: dst_pos[image_of[x]] for i, x in enumerate(src_els)}


def _inclusion_map(src_els: list, dst_els: list) -> dict:
    dst_pos = {x: i for i, x in enumerate(dst_els)}
    return {i: dst_pos[x] for i, x in enumerate(src_els)}


class _ResidualSpace:
    """Reduction mod the coboundary space of a complex in one degree."""

    def __init__(self, cx: BarComplex, n: int):
        from plocal.cohomology import _d_matrix_rows_field, _image_vectors_gf2, _image_vectors_modp

        self.p = cx.M.p
        self.ncols = cx.dim(n)
        if n == 0:
            prev = []
        else:
            prev, _ = _d_matrix_rows_field(cx, n - 1, self.p)
        if self.p == 2:
            img = _image_vectors_gf2(prev, cx.dim(n - 1) if n else 0, self.ncols)
            self.reduced, self.pivots = gf2.eliminate(img, self.ncols)
            self.reduced = [r for r in self.reduced if r]
            self.pivots = self.pivots[: len(self.reduced)]
        else:
            img = _image_vectors_modp(prev, cx.dim(n - 1) if n else 0, self.ncols, self.p)
            mat = ModPMatrix(img, self.ncols, self.p)
            self.pivots, self.ech = mat._echelon()

    def residual(self, vec: list[int]):
        if self.p == 2:
            v = rowbits(vec)
            for row, piv in zip(self.reduced, self.pivots):
                if (v >> piv) & 1:
                    v ^= row
            return v
        v = [x % self.p for x in vec]
        for row, piv in zip(self.ech, self.pivots):
            if v[piv]:
                f = v[piv]
                v = [(a - f * b) % self.p for a, b in zip(v, row)]
        return tuple(v)


def _solve_conditions(p: int, nbasis: int, condition_rows: list) -> list[list[int]]:
    """Nullspace of stacked condition functionals in basis coordinates."""
    if not condition_rows:
        return [[int(i == j) for j in range(nbasis)] for i in range(nbasis)]
    if p == 2:
        return [bitsrow(v, nbasis) for v in gf2.nullspace(condition_rows, nbasis)]
    return ModPMatrix(condition_rows, nbasis, p).nullspace()


def stable_elements(F: FusionSystem, M: CoefficientModule, n: int,
                    order_cap: int = 64, degree_cap: int = 3) -> dict:
    """The subspace of H^n(S; M) equalized by every fusion morphism.

    Coefficients must carry the trivial action.  Returns dimension data,
    basis cocycles, and the fingerprint used for regression pinning.
    """
    if not M.is_trivial_action():
        raise ValueError("stable elements require trivial coefficients")
    if not M.is_prime_field():
        return _stable_elements_lattice(F, M, n, order_cap, degree_cap)
    p = M.p
    GS, s_els = indexed_subgroup(F.S)
    cx_S = BarComplex(GS, M, order_cap, degree_cap)
    HS = cohomology_of(cx_S, n)
    if HS.dimension == 0:
        return {
            "dimension": 0,
            "ambient_dimension": 0,
            "invariants": [],
            "basis": [],
            "degree": n,
        }

    condition_rows = []  # functionals over HS-basis coordinates
    complexes: dict = {}

    def complex_of(P: Subgroup) -> tuple[BarComplex, list, "_ResidualSpace"]:
        key = P.elements
        out = complexes.get(key)
        if out is None:
            GP, p_els = indexed_subgroup(P)
            cx = BarComplex(GP, M, order_cap, degree_cap)
            out = (cx, p_els, _ResidualSpace(cx, n))
            complexes[key] = out
        return out

    for cond in _stability_conditions(F):
        P1, map1, map2 = cond
        cx_P, p_els, res_space = complex_of(P1)
        h1 = _hom_index_map(p_els, s_els, map1)
        h2 = _hom_index_map(p_els, s_els, map2)
        R1 = restriction_matrix(cx_P, cx_S, n, h1)
        R2 = restriction_matrix(cx_P, cx_S, n, h2)
        per_basis = []
        for vec in HS.basis:
            w = [
                (sum(r1[i] * vec[i] for i in range(len(vec)))
                 - sum(r2[i] * vec[i] for i in range(len(vec)))) % p
                for r1, r2 in zip(R1, R2)
            ]
            per_basis.append(res_space.residual(w))
        if p == 2:
            width = cx_P.dim(n)
            for bit in range(width):
                row = 0
                for i, r in enumerate(per_basis):
                    if (r >> bit) & 1:
                        row |= 1 << i
                if row:
                    condition_rows.append(row)
        else:
            width = cx_P.dim(n)
            for c in range(width):
                row = [per_basis[i][c] for i in range(len(per_basis))]
                if any(row):
                    condition_rows.append(row)

    sols = _solve_conditions(p, HS.dimension, condition_rows)
    basis = []
    for a in sols:
        vec = [0] * cx_S.dim(n)
        for i, coeff in enumerate(a):
            if coeff % p:
                for t in range(len(vec)):
                    vec[t] = (vec[t] + coeff * HS.basis[i][t]) % p
        basis.append(vec)
    out = {
        "degree": n,
        "dimension": len(sols),
        "ambient_dimension": HS.dimension,
        "invariants": [p] * len(sols),
        "basis": basis,
    }
    out["fingerprint"] = _fingerprint(out)
    return out


def _stability_conditions(F: FusionSystem):
    """(P', inclusion-map, twisted-map) triples over generators and all of
    their subgroup restrictions.  Inner generators are skipped: ambient
    conjugation acts trivially on cohomology."""
    seen = set()
    for g in F.generators:
        dom = g.domain
        look = g.lookup()
        for P1 in F.subgroups():
            if not P1 <= dom:
                continue
            map1 = {x: x for x in P1.elements}
            map2 = {x: look[x] for x in P1.elements}
            if map1 == map2:
                continue
            key = (P1.elements, tuple(sorted(map2.items())))
            if key in seen:
                continue
            seen.add(key)
            yield (P1, map1, map2)


def _fingerprint(data: dict) -> str:
    import hashlib

    h = hashlib.sha256()
    h.update(repr((data["degree"], data["invariants"], data["basis"])).encode())
    return h.hexdigest()[:16]


def _stable_elements_lattice(F: FusionSystem, M: CoefficientModule, n: int,
                             order_cap: int, degree_cap: int) -> dict:
    """Z/p^k coefficients: intersect the condition lattices and present
    the quotient by coboundaries via Smith normal form."""
    from plocal.cohomology import _dense_int_matrix, _kernel_mod, _lattice_quotient

    GS, s_els = indexed_subgroup(F.S)
    cx_S = BarComplex(GS, M, order_cap, degree_cap)
    mods_cur = cx_S.M.moduli() * len(cx_S.basis(n))
    dim = len(mods_cur)
    d_n = _dense_int_matrix(cx_S, n)
    mods_next = cx_S.M.moduli() * len(cx_S.basis(n + 1))
    K = _kernel_mod(d_n, mods_next, dim)

    for P1, map1, map2 in _stability_conditions(F):
        GP, p_els = indexed_subgroup(P1)
        cx_P = BarComplex(GP, M, order_cap, degree_cap)
        h1 = _hom_index_map(p_els, s_els, map1)
        h2 = _hom_index_map(p_els, s_els, map2)
        R1 = restriction_matrix(cx_P, cx_S, n, h1)
        R2 = restriction_matrix(cx_P, cx_S, n, h2)
        diff = [
            [r1[i] - r2[i] for i in range(dim)] for r1, r2 in zip(R1, R2)
        ]
        dP = _dense_int_matrix(cx_P, n - 1) if n else []
        modsP = cx_P.M.moduli() * len(cx_P.basis(n))
        # lattice {z : diff z ∈ im dP + moduli}
        width = len(diff)
        block = []
        prev_dim = len(dP[0]) if dP else 0
        for i in range(width):
            row = list(diff[i])
            row += [-dP[i][j] for j in range(prev_dim)] if dP else []
            row += [modsP[i] if k == i else 0 for k in range(width)]
            block.append(row)
        from plocal.linalg import integer_kernel_basis

        kern = integer_kernel_basis(block)
        cond_lattice = [v[:dim] for v in kern]
        K = _lattice_intersect(K, cond_lattice, dim)

    d_prev = _dense_int_matrix(cx_S, n - 1) if n else []
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
    out = {
        "degree": n,
        "dimension": len(invs),
        "invariants": invs,
        "basis": reps,
        "ambient_dimension": None,
    }
    out["fingerprint"] = _fingerprint(out)
    return out


def _lattice_intersect(A_gens, B_gens, dim):
    """Generators of the intersection of two integer lattices in Z^dim."""
    from plocal.linalg import integer_kernel_basis

    if not A_gens or not B_gens:
        return []
    cols = len(A_gens) + len(B_gens)
    rows = []
    for i in range(dim):
        rows.append(
            [g[i] for g in A_gens] + [-g[i] for g in B_gens]
        )
    kern = integer_kernel_basis(rows)
    out = []
    for v in kern:
        vec = [0] * dim
        for s, g in enumerate(A_gens):
            for t in range(dim):
                vec[t] += v[s] * g[t]
        out.append(vec)
    return [v for v in out if any(v)]


# -- stable elements along an approximation ---------------------------------


def stable_elements_limit(F: FusionSystem, stage_fusions: list[FusionSystem],
                          M: CoefficientModule, n: int) -> dict:
    """Per-stage stable subspaces, the connecting restrictions, and the
    comparison with the ambient-level stable space."""
    stages = []
    for Fi in stage_fusions:
        stages.append(stable_elements(Fi, M, n))
    full = stable_elements(F, M, n)
    dims = [s["dimension"] for s in stages]
    # restriction of the ambient stable space into each stage
    GS, s_els = indexed_subgroup(F.S)
    cx_S = BarComplex(GS, M)
    ranks = []
    for Fi, st in zip(stage_fusions, stages):
        GP, p_els = indexed_subgroup(Fi.S)
        cx_P = BarComplex(GP, M)
        incl = _inclusion_map(p_els, s_els)
        R = restriction_matrix(cx_P, cx_S, n, incl)
        res = _ResidualSpace(cx_P, n)
        p = M.p
        images = []
        for vec in full["basis"]:
            w = [sum(r[i] * vec[i] for i in range(len(vec))) % p for r in R]
            images.append(res.residual(w))
        if p == 2:
            rank = gf2.rank(images, cx_P.dim(n))
        else:
            rank = ModPMatrix([list(v) for v in images], cx_P.dim(n), p).rank()
        ranks.append(rank)
    eventually = dims and all(d == dims[-1] for d in dims[-2:])
    return {
        "stage_dimensions": dims,
        "full_dimension": full["dimension"],
        "restriction_ranks": ranks,
        "limit_dimension": dims[-1] if dims else 0,
        "stabilized": bool(eventually),
        "matches_full": bool(dims) and ranks[-1] == full["dimension"] == dims[-1],
    }


# -- the two-variable second page --------------------------------------------


def _quotient_group_of(S: Subgroup, R: Subgroup):
    """S/R as an IndexedGroup, with projection data."""
    from plocal.groups import quotient_group

    GS, s_els = indexed_subgroup(S)
    pos = {x: i for i, x in enumerate(s_els)}
    r_idx = [pos[x] for x in R.elements]
    Q = quotient_group(GS, r_idx, name="S/R")
    rep_of = {}
    r_arr = r_idx
    for g in range(GS.order):
        coset = sorted(GS.mul(g, h) for h in r_arr)
        rep_of[g] = coset[0]
    qpos = {r: i for i, r in enumerate(Q.labels)}
    return GS, s_els, Q, rep_of, qpos


def class_coordinates(H: CohomologyGroup, cx: BarComplex, vec: list[int]):
    """Coordinates of a cocycle's class in the representative basis
    (prime-field path)."""
    p = cx.M.p
    n = H.degree
    res = _ResidualSpace(cx, n)
    target = res.residual(vec)
    if p == 2:
        basis_res = [res.residual(b) for b in H.basis]
        combo = gf2.solve(basis_res, cx.dim(n), target)
        if combo is None:
            raise ArithmeticError("vector is not a cocycle class in this basis")
        return [int((combo >> i) & 1) for i in range(len(H.basis))]
    basis_res = [list(res.residual(b)) for b in H.basis]
    width = cx.dim(n)
    # solve sum a_i basis_res_i = target over GF(p)
    rows = [[basis_res[i][c] for i in range(len(H.basis))] for c in range(width)]
    aug = [row + [list(target)[c]] for c, row in enumerate(rows)]
    sol = _solve_linear_modp(aug, len(H.basis), p)
    if sol is None:
        raise ArithmeticError("vector is not a cocycle class in this basis")
    return sol


def _solve_linear_modp(aug_rows, nvars, p):
    work = [row[:] for row in aug_rows]
    piv_cols = []
    r = 0
    for c in range(nvars):
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
            if i != r and work[i][c] % p:
                f = work[i][c]
                work[i] = [(a - f * b) % p for a, b in zip(work[i], work[r])]
        piv_cols.append(c)
        r += 1
    sol = [0] * nvars
    for i, c in enumerate(piv_cols):
        sol[c] = work[i][nvars] % p
    # consistency
    for i in range(r, len(work)):
        if work[i][nvars] % p:
            return None
    return sol


def e2_page(F: FusionSystem, R: Subgroup, M: CoefficientModule, n: int, m: int,
            order_cap: int = 64, degree_cap: int = 3) -> dict:
    """E2^{n,m} = stable classes in H^n(S/R; H^m(R; M)) for a strongly
    closed R (prime-field coefficients)."""
    if not M.is_trivial_action():
        raise ValueError("the page needs trivial outer coefficients")
    if not M.is_prime_field():
        raise ValueError("the page is implemented for prime-field coefficients")
    if not F.is_strongly_closed(R):
        raise ValueError("R must be strongly closed")
    p = M.p

    data = _x_module(F, F.S, R, M, n, m, order_cap, degree_cap)
    XS = data["H_outer"]
    if XS.dimension == 0:
        return {"n": n, "m": m, "dimension": 0, "invariants": [], "inner_dimension": data["H_inner"].dimension}

    condition_rows = []
    x_cache = {F.S.elements: data}
    for P1, map1, map2 in _stability_conditions(F):
        rows = _gamma_condition_rows(F, R, M, n, m, P1, map1, map2, data, x_cache,
                                     order_cap, degree_cap)
        condition_rows.extend(rows)
    sols = _solve_conditions(p, XS.dimension, condition_rows)
    return {
        "n": n,
        "m": m,
        "dimension": len(sols),
        "invariants": [p] * len(sols),
        "inner_dimension": data["H_inner"].dimension,
        "ambient_dimension": XS.dimension,
    }


def _x_module(F, P: Subgroup, R: Subgroup, M, n, m, order_cap, degree_cap):
    """H^n(P/(P∩R); H^m(P∩R; M)) with all the bookkeeping."""
    from plocal.ptoral import make_subgroup

    amb = F.ambient
    PR = make_subgroup(amb, [x for x in P.elements if x in R.as_set()], closed=True)
    G_pr, pr_els = indexed_subgroup(PR)
    cx_inner = BarComplex(G_pr, M, order_cap, degree_cap)
    H_inner = cohomology_of(cx_inner, m)

    GP, p_els = indexed_subgroup(P)
    pos = {x: i for i, x in enumerate(p_els)}
    r_local = [pos[x] for x in PR.elements]
    from plocal.groups import quotient_group

    Qbar = quotient_group(GP, r_local, name="P/R")
    rep_of = {}
    for g in range(GP.order):
        coset = sorted(GP.mul(g, h) for h in r_local)
        rep_of[g] = coset[0]
    qpos = {r: i for i, r in enumerate(Qbar.labels)}

    # action of the quotient on inner cohomology via conjugation pullback
    inner_rank = H_inner.dimension
    action = {}
    pr_pos = {x: i for i, x in enumerate(pr_els)}
    for qi, rep in enumerate(Qbar.labels):
        g = p_els[rep]
        ginv = amb.inv(g)
        conj_map = {
            i: pr_pos[amb.conj(ginv, pr_els[i])] for i in range(len(pr_els))
        }
        cols = []
        for b in H_inner.basis:
            img = _pullback_vec(cx_inner, cx_inner, m, conj_map, b)
            cols.append(class_coordinates(H_inner, cx_inner, img))
        mat = tuple(
            tuple(cols[j][i] for j in range(inner_rank)) for i in range(inner_rank)
        )
        action[qi] = mat
    N = CoefficientModule(M.p, (1,) * inner_rank, action if inner_rank else None)
    cx_outer = BarComplex(Qbar, N, order_cap, degree_cap)
    H_outer = cohomology_of(cx_outer, n)
    return {
        "P": P,
        "PR": PR,
        "cx_inner": cx_inner,
        "H_inner": H_inner,
        "Qbar": Qbar,
        "rep_of": rep_of,
        "qpos": qpos,
        "p_els": p_els,
        "pr_els": pr_els,
        "cx_outer": cx_outer,
        "H_outer": H_outer,
        "N": N,
    }


def _pullback_vec(cx_src, cx_dst, deg, hom_idx, vec):
    rows = restriction_matrix(cx_src, cx_dst, deg, hom_idx)
    p = cx_src.M.p
    return [sum(r[i] * vec[i] for i in range(len(vec))) % p for r in rows]


def _gamma_condition_rows(F, R, M, n, m, P1, map1, map2, s_data, x_cache,
                          order_cap, degree_cap):
    p = M.p
    key = P1.elements
    if key not in x_cache:
        x_cache[key] = _x_module(F, P1, R, M, n, m, order_cap, degree_cap)
    pdata = x_cache[key]
    s_outer = s_data["cx_outer"]
    H_S = s_data["H_outer"]
    rows_out = []

    per_basis = []
    for vec in H_S.basis:
        w1 = _gamma_pullback(F, R, M, m, n, s_data, pdata, map1, vec)
        w2 = _gamma_pullback(F, R, M, m, n, s_data, pdata, map2, vec)
        diff = [(a - b) % p for a, b in zip(w1, w2)]
        res = _ResidualSpace(pdata["cx_outer"], n)
        per_basis.append(res.residual(diff))
    width = pdata["cx_outer"].dim(n)
    if p == 2:
        for bit in range(width):
            row = 0
            for i, r in enumerate(per_basis):
                if (r >> bit) & 1:
                    row |= 1 << i
            if row:
                rows_out.append(row)
    else:
        for c in range(width):
            row = [per_basis[i][c] for i in range(len(per_basis))]
            if any(row):
                rows_out.append(row)
    return rows_out


def _gamma_pullback(F, R, M, m, n, s_data, pdata, elt_map, vec):
    """Pullback X(S) -> X(P) along an ambient homomorphism P -> S."""
    amb = F.ambient
    p = M.p
    # group-level map on quotients
    s_els = s_data["p_els"]
    s_pos = {x: i for i, x in enumerate(s_els)}
    hom_q = {}
    for qi, rep in enumerate(pdata["Qbar"].labels):
        g = pdata["p_els"][rep]
        img = elt_map[g]
        hom_q[qi] = s_data["qpos"][s_data["rep_of"][s_pos[img]]]
    # coefficient-level map: H^m(R) -> H^m(P∩R) along the restricted hom
    pr_els = pdata["pr_els"]
    spr_els = s_data["pr_els"]
    spr_pos = {x: i for i, x in enumerate(spr_els)}
    hom_c = {i: spr_pos[elt_map[pr_els[i]]] for i in range(len(pr_els))}
    cmap_cols = []
    for b in s_data["H_inner"].basis:
        img = _pullback_vec(pdata["cx_inner"], s_data["cx_inner"], m, hom_c, b)
        cmap_cols.append(class_coordinates(pdata["H_inner"], pdata["cx_inner"], img))
    rank_p = pdata["H_inner"].dimension
    rank_s = s_data["H_inner"].dimension
    cmap = [
        [cmap_cols[j][i] for j in range(rank_s)] for i in range(rank_p)
    ]
    rows = restriction_matrix(pdata["cx_outer"], s_data["cx_outer"], n, hom_q, cmap)
    return [sum(r[i] * vec[i] for i in range(len(vec))) % p for r in rows]

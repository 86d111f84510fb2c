"""Normalizer, centralizer and quotient fusion systems, plus the
component data of homomorphism spaces into the ambient group.

Fusion-system equality everywhere is decided on hom-sets over a probe
family (class representatives mapping into S), never on raw generator
sets: distinct presentations of one system must compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from plocal.fusion import FusionMorphism, FusionSystem
from plocal.groups import IndexedCarrier, IndexedGroup, quotient_group
from plocal.ptoral import Subgroup, centralizer, make_subgroup, normalizer


def aut_full(F: FusionSystem, A: Subgroup) -> list[FusionMorphism]:
    """Every automorphism of A as an abstract group (not only F-maps)."""
    amb = A.ambient
    els = A.elements
    n = len(els)
    idx = {x: i for i, x in enumerate(els)}
    table = [[idx[amb.mul(a, b)] for b in els] for a in els]

    # brute force over bijections fixing the identity, checking the
    # homomorphism property; fine for |A| at desk scale
    from itertools import permutations

    rest = list(range(1, n))
    out = []
    for perm in permutations(rest):
        assign = [0] + list(perm)
        good = True
        for a in range(n):
            for b in range(n):
                if assign[table[a][b]] != table[assign[a]][assign[b]]:
                    good = False
                    break
            if not good:
                break
        if good:
            out.append(FusionMorphism(A, A, tuple(els[j] for j in assign)))
    return out


def n_s_k(F: FusionSystem, A: Subgroup, K: list[FusionMorphism]) -> Subgroup:
    """N_S^K(A) = {x in N_S(A) : c_x restricted to A lies in K}."""
    amb = F.ambient
    kimgs = {f.images for f in K}
    out = []
    for x in normalizer(A, within=F.S).elements:
        cmap = tuple(amb.conj(x, a) for a in A.elements)
        if cmap in kimgs:
            out.append(x)
    return make_subgroup(amb, out, closed=True)


def _transport_k(F: FusionSystem, A: Subgroup, K: list[FusionMorphism],
                 f_images: tuple) -> list[FusionMorphism]:
    """fK = {f γ f^{-1}} on f(A)."""
    amb = F.ambient
    look = dict(zip(A.elements, f_images))
    back = {y: x for x, y in look.items()}
    B = make_subgroup(amb, f_images, closed=True)
    out = []
    for gamma in K:
        glook = gamma.lookup()
        out.append(
            FusionMorphism(B, B, tuple(look[glook[back[y]]] for y in B.elements))
        )
    return out


def is_fully_k_normalized(F: FusionSystem, A: Subgroup, K: list[FusionMorphism]) -> bool:
    mine = len(n_s_k(F, A, K))
    for img, maps in F.iso_maps(A).items():
        for m in maps:
            fk = _transport_k(F, A, K, m)
            if len(n_s_k(F, img, fk)) > mine:
                return False
    return True


def normalizer_fusion(F: FusionSystem, A: Subgroup, K: list[FusionMorphism] | None = None,
                      check_saturation: bool = False):
    """The K-normalizer fusion system of A over N_S^K(A).

    Morphisms P -> Q are restrictions of F-morphisms on PA that carry A
    into A within K.  Saturation of the result for fully K-normalized A
    is rechecked at desk scale when requested, not taken on faith.
    """
    if K is None:
        K = [f for f in aut_full(F, A)]
    if not is_fully_k_normalized(F, A, K):
        raise ValueError("A is not fully K-normalized")
    amb = F.ambient
    N = n_s_k(F, A, K)
    kimgs = {f.images for f in K}
    gens = []
    seen = set()
    nset = N.as_set()
    sub_n = _subgroups_of(F, N)
    for P in sub_n:
        PA = _product(amb, P, A)
        for img, maps in F.iso_maps(PA).items():
            for m in maps:
                look = dict(zip(PA.elements, m))
                if tuple(look[a] for a in A.elements) not in kimgs:
                    continue
                if any(look[x] not in nset for x in P.elements):
                    continue
                res = tuple(look[x] for x in P.elements)
                key = (P.elements, res)
                if key in seen or res == P.elements:
                    continue
                seen.add(key)
                gens.append(FusionMorphism(P, N, res))
    out = FusionSystem(N, gens, p=F.p, name=f"N^K({F.name})")
    result = {"fusion": out}
    if check_saturation:
        ok, witness = out.is_saturated()
        result["saturated"] = ok
        result["witness"] = witness
    return out if not check_saturation else (out, result)


def centralizer_fusion(F: FusionSystem, A: Subgroup) -> FusionSystem:
    ident = FusionMorphism(A, A, A.elements)
    return normalizer_fusion(F, A, [ident])


def _subgroups_of(F: FusionSystem, N: Subgroup) -> list[Subgroup]:
    nset = N.as_set()
    return [P for P in F.subgroups() if P.as_set() <= nset]


def _product(amb, P: Subgroup, A: Subgroup) -> Subgroup:
    from plocal.fusion import _elt_closure

    return make_subgroup(
        amb, _elt_closure(amb, list(P.elements) + list(A.elements)), closed=True
    )


def fusion_equal(F1: FusionSystem, F2: FusionSystem) -> bool:
    """Hom-set equality over class-representative probes into S."""
    if F1.S.elements != F2.S.elements:
        return False
    reps = {cls[0].elements for cls in F1.subgroup_classes()}
    reps |= {cls[0].elements for cls in F2.subgroup_classes()}
    for els in reps:
        P = make_subgroup(F1.ambient, els, closed=True)
        P2 = make_subgroup(F2.ambient, els, closed=True)
        h1 = {f.images for f in F1.hom_set(P, F1.S)}
        h2 = {f.images for f in F2.hom_set(P2, F2.S)}
        if h1 != h2:
            return False
    return True


def is_central(F: FusionSystem, A: Subgroup) -> bool:
    if len(A) == 1:
        return True
    if centralizer(A, within=F.S).elements != F.S.elements:
        return False
    try:
        CF = centralizer_fusion(F, A)
    except ValueError:
        return False
    return fusion_equal(CF, F)


def is_normal(F: FusionSystem, A: Subgroup) -> bool:
    if len(A) == 1:
        return True
    if normalizer(A, within=F.S).elements != F.S.elements:
        return False
    try:
        NF = normalizer_fusion(F, A)
    except ValueError:
        return False
    return fusion_equal(NF, F)


# -- quotient fusion -------------------------------------------------------


@dataclass
class QuotientProjection:
    """Bookkeeping for S -> S/A: index maps, lifts, induced morphisms."""

    amb_src: object
    carrier: IndexedCarrier
    s_index: dict
    s_elements: list
    rep_of: dict
    pos: dict

    def project(self, x) -> int:
        return self.pos[self.rep_of[self.s_index[x]]]

    def lift(self, xbar: int):
        return self.s_elements[self.carrier.group.labels[xbar]]

    def subgroup(self, P: Subgroup) -> Subgroup:
        return make_subgroup(
            self.carrier, {self.project(x) for x in P.elements}, closed=True
        )

    def induce(self, f: FusionMorphism, qP: Subgroup, qQ: Subgroup) -> FusionMorphism:
        look = f.lookup()
        images = []
        for xbar in qP.elements:
            x = self.lift(xbar)
            images.append(self.project(look[x]))
        return FusionMorphism(qP, qQ, tuple(images))


def quotient_fusion(F: FusionSystem, A: Subgroup, with_projection: bool = False):
    """F/A over S/A for A normal in F; generators are the induced maps."""
    if not is_normal(F, A):
        raise ValueError("A is not normal in the fusion system")
    amb = F.ambient
    els = list(F.S.elements)
    index = {x: i for i, x in enumerate(els)}
    n = len(els)
    table = np.empty((n, n), dtype=np.int32)
    for i in range(n):
        for j in range(n):
            table[i, j] = index[amb.mul(els[i], els[j])]
    G = IndexedGroup(table, name="S")
    a_idx = [index[x] for x in A.elements]
    Q = quotient_group(G, a_idx, name=f"{F.S.ambient.__class__.__name__}/A")
    carrier = IndexedCarrier(Q)
    rep_of = {}
    aset = set(a_idx)
    for g in range(n):
        coset = sorted(G.mul(g, a) for a in a_idx)
        rep_of[g] = coset[0]
    pos = {r: i for i, r in enumerate(Q.labels)}
    proj = QuotientProjection(amb, carrier, index, els, rep_of, pos)

    qS = make_subgroup(carrier, list(range(Q.order)), closed=True)
    gens = []
    seen = set()
    for B in F.subgroups():
        if not A <= B:
            continue
        qB = proj.subgroup(B)
        for img, maps in F.iso_maps(B).items():
            if not A <= img:
                continue
            for m in maps:
                f = FusionMorphism(B, F.S, m)
                qf = proj.induce(f, qB, qS)
                key = (qB.elements, qf.images)
                if key in seen or qf.images == qB.elements:
                    continue
                seen.add(key)
                gens.append(qf)
    out = FusionSystem(qS, gens, p=F.p, name=f"{F.name}/A")
    if with_projection:
        return out, proj
    return out


def bullet_centralizer_invariance(F: FusionSystem, P: Subgroup) -> dict:
    """Centralizer data is blind to the stable enlargement: both the
    fully-centralized test and the centralizer fusion agree for P and P*,
    and the canonical filtration of P stabilizes to the same system."""
    from plocal.bullet import bullet_data

    if not F.is_fully_centralized(P):
        raise ValueError("P must be fully centralized")
    pair = bullet_data(F)
    Ps = pair.star(P)
    report = {
        "star": Ps,
        "fully_centralized_match": F.is_fully_centralized(Ps),
        "centralizer_equal": centralizer(P, within=F.S).elements
        == centralizer(Ps, within=F.S).elements,
    }
    CP = centralizer_fusion(F, P)
    CPs = centralizer_fusion(F, Ps)
    report["fusion_equal"] = fusion_equal(CP, CPs)
    # filtration by torsion levels
    amb = F.ambient
    p = F.p
    filtration = []
    level = 0
    prev = None
    while True:
        members = [x for x in P.elements if _order_divides(amb, x, p**level)]
        sub = make_subgroup(amb, members)
        if prev is not None and sub.elements == prev:
            break
        filtration.append(sub)
        prev = sub.elements
        if sub.elements == P.elements:
            break
        level += 1
    report["filtration_orders"] = [len(s) for s in filtration]
    stable_from = None
    for i, sub in enumerate(filtration):
        if F.is_fully_centralized(sub) and fusion_equal(
            centralizer_fusion(F, sub), CP
        ):
            stable_from = i
            break
    report["filtration_stable_from"] = stable_from
    report["pass"] = (
        report["fully_centralized_match"]
        and report["centralizer_equal"]
        and report["fusion_equal"]
    )
    return report


def _order_divides(amb, x, n: int) -> bool:
    out = amb.identity()
    base = x
    k = n
    while k:
        if k & 1:
            out = amb.mul(out, base)
        base = amb.mul(base, base)
        k >>= 1
    return out == amb.identity()


# -- mapping components -----------------------------------------------------


def all_homomorphisms(E: IndexedGroup, F: FusionSystem) -> list[tuple]:
    """Every homomorphism E -> S as an image tuple over E's elements."""
    amb = F.ambient
    gens = _small_generating_set(E)
    words = _words_for_elements(E, gens)
    out = []
    candidates = list(F.S.elements)

    def extend(assign, k):
        if k == len(gens):
            images = []
            for w in words:
                y = amb.identity()
                for gi in w:
                    y = amb.mul(y, assign[gi])
                images.append(y)
            # verify the homomorphism property fully
            look = dict(zip(range(E.order), images))
            for a in range(E.order):
                for b in range(E.order):
                    if look[E.mul(a, b)] != amb.mul(look[a], look[b]):
                        return
            out.append(tuple(images))
            return
        for y in candidates:
            if _order_divides(amb, y, E.element_order(gens[k])):
                extend(assign + [y], k + 1)

    extend([], 0)
    return sorted(set(out))


def _small_generating_set(E: IndexedGroup) -> list[int]:
    gens: list[int] = []
    have = {0}
    for x in range(E.order):
        if x not in have:
            gens.append(x)
            have = set(E.closure(gens))
            if len(have) == E.order:
                break
    return gens


def _words_for_elements(E: IndexedGroup, gens: list[int]) -> list[list[int]]:
    """For each element of E, a word in the chosen generators (indices
    into gens)."""
    words = {0: []}
    frontier = [0]
    while frontier:
        x = frontier.pop(0)
        for gi, g in enumerate(gens):
            y = E.mul(x, g)
            if y not in words:
                words[y] = words[x] + [gi]
                frontier.append(y)
    return [words[x] for x in range(E.order)]


def mapping_components(F: FusionSystem, E: IndexedGroup) -> dict:
    """Homomorphisms E -> S up to F-fusion and Inn(S), with centralizer
    data per component whose image is fully centralized."""
    amb = F.ambient
    homs = all_homomorphisms(E, F)
    hom_set = set(homs)
    components = []
    seen = set()
    for h in homs:
        if h in seen:
            continue
        orbit = {h}
        frontier = [h]
        while frontier:
            cur = frontier.pop()
            img = make_subgroup(amb, set(cur))
            for _, maps in F.iso_maps(img).items():
                for m in maps:
                    look = dict(zip(img.elements, m))
                    nxt = tuple(look[y] for y in cur)
                    if nxt in hom_set and nxt not in orbit:
                        orbit.add(nxt)
                        frontier.append(nxt)
        seen |= orbit
        rep = min(orbit)
        img = make_subgroup(amb, set(rep))
        entry = {"representative": rep, "size": len(orbit), "image_order": len(img)}
        if F.is_fully_centralized(img):
            entry["centralizer_order"] = len(centralizer(img, within=F.S))
            entry["centralizer_fusion"] = centralizer_fusion(F, img)
        components.append(entry)
    components.sort(key=lambda e: e["representative"])
    return {"count": len(components), "components": components}

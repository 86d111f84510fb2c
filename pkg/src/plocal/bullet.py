"""Idempotent enlargement of subgroups of a split p-toral truncation.

For a fusion system F over S = T ⋊ π at truncation N, each subgroup P is
enlarged by the stable subtorus fixed by every torus automorphism of F
that restricts to the identity on the p^e-th powers of P (e the exponent
of S/T).  The enlargement P* reduces the object poset to finitely many
conjugacy classes and is the retraction pair feeding the telescopic
transporter construction.

Subtorus detection at a finite truncation uses the Smith normal form of
the stacked (ω - 1) matrices: an elementary divisor counts as zero when
its p-valuation reaches N minus a margin (default 2), the finite stand-in
for honest divisibility.  Two-level stabilization keeps this honest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from plocal.arith import padic_valuation
from plocal.fusion import FusionMorphism, FusionSystem
from plocal.linalg import smith_normal_form
from plocal.ptoral import (
    AmbientGroup,
    Subgroup,
    canon_coord,
    generate,
    make_subgroup,
)

MARGIN = 2


def torus_subgroup(F: FusionSystem) -> Subgroup:
    sub = F.S.torus_part()
    return sub


def quotient_exponent(F: FusionSystem) -> int:
    """e = min{k : x^(p^k) in T for all x in S}."""
    amb: AmbientGroup = F.ambient
    p = amb.p
    tset = F.S.torus_part().as_set()
    e = 0
    for x in F.S.elements:
        k = 0
        y = x
        while y not in tset:
            y = _pow(amb, y, p)
            k += 1
        e = max(e, k)
    return e


def _pow(amb, x, n):
    out = amb.identity()
    base = x
    while n:
        if n & 1:
            out = amb.mul(out, base)
        base = amb.mul(base, base)
        n >>= 1
    return out


def torus_matrix(amb: AmbientGroup, images: dict) -> list[list[int]]:
    """Integer matrix (mod p^N) of a torus endomorphism given on the
    standard generators e_i = (coordinate i equal to 1/p^N)."""
    N = amb.truncation
    p = amb.p
    r = amb.rank
    cols = []
    for i in range(r):
        gen = tuple(
            canon_coord(1 if j == i else 0, N if j == i else 0, p) for j in range(r)
        )
        img = images[(gen, 0)]
        col = []
        for j in range(r):
            a, k = img[0][j]
            col.append(a * p ** (N - k))
        cols.append(col)
    return [[cols[j][i] for j in range(r)] for i in range(r)]


def weyl_matrices(F: FusionSystem) -> list[list[list[int]]]:
    """Aut_F(T) as integer matrices mod p^N acting on torus coordinates."""
    T = F.S.torus_part()
    mats = []
    for f in F.iso_set(T, T):
        look = f.lookup()
        mats.append(torus_matrix(F.ambient, look))
    return mats


def _balanced(v: int, mod: int) -> int:
    v %= mod
    return v - mod if v > mod // 2 else v


def stable_subtorus(F: FusionSystem, fixed_on) -> Subgroup:
    """Largest subtorus fixed by all torus automorphisms of F that are the
    identity on ``fixed_on`` (an element collection inside T)."""
    amb = F.ambient
    p, N, r = amb.p, amb.truncation, amb.rank
    T = F.S.torus_part()
    rows = []
    fixed_pts = list(fixed_on.elements) if isinstance(fixed_on, Subgroup) else list(fixed_on)
    for f in F.iso_set(T, T):
        look = f.lookup()
        if any(look[x] != x for x in fixed_pts):
            continue
        mat = torus_matrix(amb, look)
        for i in range(r):
            row = [
                _balanced(mat[i][j] - (1 if i == j else 0), p**N) for j in range(r)
            ]
            rows.append(row)
    rows = [row for row in rows if any(row)]
    if not rows:
        basis = [[int(i == j) for j in range(r)] for i in range(r)]
    else:
        D, _, V = smith_normal_form(rows)
        basis = []
        for j in range(r):
            d = D[j][j] if j < len(D) and j < len(D[0]) else 0
            if d != 0 and padic_valuation(d, p) >= N - MARGIN:
                # ambiguous zone: a divisor this deep cannot be told apart
                # from honest divisibility at this truncation
                from plocal.ptoral import TruncationTooCoarse

                raise TruncationTooCoarse(
                    "subtorus detection needs a deeper truncation"
                )
            if d == 0:
                basis.append([V[i][j] for i in range(r)])
    gens = []
    for vec in basis:
        coords = tuple(canon_coord(vec[i], N, p) for i in range(r))
        gens.append((coords, 0))
    return generate(amb, gens)


def power_images(F: FusionSystem, P: Subgroup, e: int) -> frozenset:
    """{x^(p^e) : x in P} as an element set (it lands in the torus; the
    fixedness conditions below only ever evaluate pointwise on it)."""
    amb = F.ambient
    idx = amb.index()
    els = amb.elements()
    table = amb.dense_table()
    import numpy as np

    cur = np.fromiter((idx[x] for x in P.elements), dtype=np.int32)
    for _ in range(e):
        power = cur.copy()
        for _ in range(amb.p - 1):
            power = table[power, cur]
        cur = power
    return frozenset(els[i] for i in set(cur.tolist()))


@dataclass
class RetractionPair:
    """The subgroup-level star map bundled with its fusion-level extension."""

    fusion: FusionSystem
    exponent: int
    _star_cache: dict = field(default_factory=dict, repr=False)
    _verified: dict = field(default_factory=dict, repr=False)
    _torus_cache: dict = field(default_factory=dict, repr=False)

    def star(self, P: Subgroup) -> Subgroup:
        key = P.elements
        out = self._star_cache.get(key)
        if out is None:
            F = self.fusion
            pe = power_images(F, P, self.exponent)
            torus0 = self._torus_cache.get(pe)
            if torus0 is None:
                torus0 = stable_subtorus(F, pe)
                self._torus_cache[pe] = torus0
            amb = F.ambient
            import numpy as np

            idx = amb.index()
            els_all = amb.elements()
            table = amb.dense_table()
            pi = np.fromiter((idx[x] for x in P.elements), dtype=np.int32)
            ti = np.fromiter((idx[t] for t in torus0.elements), dtype=np.int32)
            prod = np.unique(table[np.ix_(pi, ti)])
            els = frozenset(els_all[i] for i in prod.tolist())
            out = self._verified.get(els)
            if out is None:
                out = make_subgroup(amb, els)
                self._verified[els] = out
            self._star_cache[key] = out
        return out

    def star_morphism(self, f: FusionMorphism) -> FusionMorphism:
        """The unique extension of f to the starred subgroups."""
        F = self.fusion
        P, Q = f.domain, f.codomain
        Ps, Qs = self.star(P), self.star(Q)
        look = f.lookup()
        want = tuple(look[x] for x in P.elements)
        found = None
        for g in F.hom_set(Ps, Qs):
            glook = g.lookup()
            if tuple(glook[x] for x in P.elements) == want:
                if found is not None:
                    raise ValueError("star extension is not unique")
                found = g
        if found is None:
            raise ValueError("no star extension exists; inconsistent torus data")
        return found

    def star_objects(self) -> list[Subgroup]:
        """All P* for P <= S, deduplicated (the finite object reservoir).

        The star map commutes with ambient conjugation, so one star per
        S-class is computed and the rest are transported along the orbit.
        """
        F = self.fusion
        amb = F.ambient
        idx = amb.index()
        els = amb.elements()
        conj = amb.conj_array()
        gens = F.ambient_generators()
        perms = [conj[idx[s]] for s in gens] + [
            conj[idx[amb.inv(s)]] for s in gens
        ]
        subs = F.subgroups()
        by_key = {P.elements: P for P in subs}
        seen = set()
        out = {}
        for P in subs:
            if P.elements in seen:
                continue
            start = tuple(sorted(idx[x] for x in P.elements))
            orbit = {start}
            frontier = [start]
            while frontier:
                cur = frontier.pop()
                for perm in perms:
                    img = tuple(sorted(int(perm[i]) for i in cur))
                    if img not in orbit:
                        orbit.add(img)
                        frontier.append(img)
            rep_star = self.star(P)
            star_idx = tuple(sorted(idx[x] for x in rep_star.elements))
            for member in orbit:
                mem_els = tuple(els[i] for i in member)
                seen.add(mem_els)
            # transport the star along a fresh orbit walk that records maps
            walked = {start: star_idx}
            frontier = [start]
            while frontier:
                cur = frontier.pop()
                cur_star = walked[cur]
                for perm in perms:
                    img = tuple(sorted(int(perm[i]) for i in cur))
                    if img not in walked:
                        walked[img] = tuple(sorted(int(perm[i]) for i in cur_star))
                        frontier.append(img)
            for member, member_star in walked.items():
                mem_els = tuple(els[i] for i in member)
                star_els = [els[i] for i in member_star]
                sub = make_subgroup(amb, star_els, closed=True)
                out[sub.elements] = sub
                cached = by_key.get(mem_els)
                if cached is not None:
                    self._star_cache.setdefault(mem_els, sub)
        return sorted(out.values(), key=lambda h: (len(h), h.key()))


def _product_subgroup(amb, P: Subgroup, T0: Subgroup) -> Subgroup:
    """P · T0 as an element set; raises if the set is not a subgroup."""
    els = {amb.mul(x, t) for x in P.elements for t in T0.elements}
    return make_subgroup(amb, els)


def bullet_subgroup(F: FusionSystem, P: Subgroup, pair: RetractionPair | None = None) -> Subgroup:
    pair = pair or bullet_data(F)
    return pair.star(P)


def bullet_data(F: FusionSystem) -> RetractionPair:
    return RetractionPair(F, quotient_exponent(F))


def retraction_properties(pair: RetractionPair, sample_morphisms: int = 40) -> dict:
    """Clause-by-clause verification of the retraction-pair contract over
    all subgroups of the truncation up to conjugacy."""
    from plocal.ptoral import centralizer, transporter_set

    F = pair.fusion
    amb = F.ambient
    report = {
        "contains": True,
        "idempotent": True,
        "monotone": True,
        "transporter": True,
        "centralizer": True,
        "unique_extension": True,
        "radical_in_image": True,
        "finitely_many_classes": True,
        "witnesses": [],
    }
    classes = F.subgroup_classes()
    reps = [cls[0] for cls in classes]
    stars = {P.elements: pair.star(P) for cls in classes for P in cls}

    subs = F.subgroups()
    for P in subs:
        sP = stars.get(P.elements) or pair.star(P)
        stars[P.elements] = sP
        if not P <= sP:
            report["contains"] = False
            report["witnesses"].append(("contains", P))
        ssP = pair.star(sP)
        if ssP.elements != sP.elements:
            report["idempotent"] = False
            report["witnesses"].append(("idempotent", P))
        if not centralizer(P, within=F.S).elements == centralizer(sP, within=F.S).elements:
            report["centralizer"] = False
            report["witnesses"].append(("centralizer", P))

    for P in subs:
        for Q in subs:
            if P <= Q:
                if not stars[P.elements] <= stars[Q.elements]:
                    report["monotone"] = False
                    report["witnesses"].append(("monotone", P, Q))

    for cls in classes:
        P = cls[0]
        for cls2 in classes:
            Q = cls2[0]
            npq = set(transporter_set(P, Q, within=F.S))
            nstar = set(
                transporter_set(stars[P.elements], stars[Q.elements], within=F.S)
            )
            if not npq <= nstar:
                report["transporter"] = False
                report["witnesses"].append(("transporter", P, Q))

    # unique extension on a morphism sample (all class-rep hom-sets)
    count = 0
    for P in reps:
        for Q, maps in F.iso_maps(P).items():
            for m in maps:
                f = FusionMorphism(P, F.S, m)
                try:
                    pair.star_morphism(f)
                except ValueError:
                    report["unique_extension"] = False
                    report["witnesses"].append(("unique_extension", f))
                count += 1
                break
            if count >= sample_morphisms:
                break
        if count >= sample_morphisms:
            break

    star_keys = {stars[P.elements].elements for P in subs}
    for P in reps:
        if F.is_centric(P) and F.is_radical(P):
            if P.elements not in star_keys:
                report["radical_in_image"] = False
                report["witnesses"].append(("radical_in_image", P))

    class_count = len({stars[P.elements].elements for P in subs})
    report["star_class_count"] = class_count
    report["pass"] = all(
        report[k]
        for k in (
            "contains",
            "idempotent",
            "monotone",
            "transporter",
            "centralizer",
            "unique_extension",
            "radical_in_image",
        )
    )
    return report

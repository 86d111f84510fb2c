"""Fusion systems over finite p-groups.

A FusionSystem is an ambient finite p-group together with a generating
set of injective homomorphisms; hom-sets are produced by breadth-first
closure over words in restrictions of generators, their inverses on the
image, inclusions, and ambient conjugations.  Closure results are
memoized per source subgroup.

Caches make instances single-writer: either serialize calls on one
instance or treat the caches as grow-only (entries are only ever added,
never mutated).  Distinct instances are fully independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from plocal.arith import padic_valuation
from plocal.groups import IndexedGroup, group_from_mul, o_p
from plocal.ptoral import (
    CapExceeded,
    Subgroup,
    centralizer,
    make_subgroup,
    normalizer,
)

DEFAULT_MAP_CAP = 100_000


@dataclass(frozen=True)
class FusionMorphism:
    """Injective homomorphism between subgroups of one ambient.

    ``images[i]`` is the image of ``domain.elements[i]``; the image
    subgroup may be smaller than the stated codomain.
    """

    domain: Subgroup
    codomain: Subgroup
    images: tuple

    def __post_init__(self):
        if len(self.images) != len(self.domain.elements):
            raise ValueError("image list length mismatch")
        if len(set(self.images)) != len(self.images):
            raise ValueError("morphism must be injective")
        cod = self.codomain.as_set()
        if any(y not in cod for y in self.images):
            raise ValueError("images leave the codomain")

    def lookup(self) -> dict:
        d = self.__dict__.get("_lookup")
        if d is None:
            d = dict(zip(self.domain.elements, self.images))
            self.__dict__["_lookup"] = d
        return d

    def __call__(self, x):
        return self.lookup()[x]

    def check_homomorphism(self):
        amb = self.domain.ambient
        look = self.lookup()
        for a in self.domain.elements:
            for b in self.domain.elements:
                if look[amb.mul(a, b)] != amb.mul(look[a], look[b]):
                    raise ValueError("not a homomorphism")

    def image_subgroup(self) -> Subgroup:
        return make_subgroup(self.domain.ambient, self.images, closed=True)

    def restrict(self, sub: Subgroup) -> "FusionMorphism":
        look = self.lookup()
        return FusionMorphism(sub, self.codomain, tuple(look[x] for x in sub.elements))

    def compose(self, first: "FusionMorphism") -> "FusionMorphism":
        """self after first (first's image must lie in self's domain)."""
        look = self.lookup()
        return FusionMorphism(
            first.domain, self.codomain, tuple(look[y] for y in first.images)
        )

    def inverse_iso(self) -> "FusionMorphism":
        img = self.image_subgroup()
        back = {y: x for x, y in self.lookup().items()}
        return FusionMorphism(img, self.domain, tuple(back[y] for y in img.elements))

    def is_identity_inclusion(self) -> bool:
        return self.images == self.domain.elements

    def map_key(self):
        return (self.domain.key(), tuple(self.domain.ambient.key(y) for y in self.images))


def conjugation_morphism(S: Subgroup, g, sub: Subgroup, codomain: Subgroup | None = None) -> FusionMorphism:
    amb = sub.ambient
    images = tuple(amb.conj(g, x) for x in sub.elements)
    return FusionMorphism(sub, codomain or S, images)


def inclusion_morphism(sub: Subgroup, codomain: Subgroup) -> FusionMorphism:
    return FusionMorphism(sub, codomain, sub.elements)


class FusionSystem:
    """Fusion system over a finite ambient p-group, given by generators."""

    def __init__(self, S: Subgroup, generators: list[FusionMorphism], p: int | None = None,
                 map_cap: int = DEFAULT_MAP_CAP, name: str = "F"):
        self.S = S
        self.ambient = S.ambient
        self.name = name
        self.map_cap = map_cap
        if p is None:
            n = len(S)
            p = 2
            for q in (2, 3, 5, 7, 11, 13):
                if n % q == 0:
                    p = q
                    break
        self.p = p
        n = len(S)
        while n > 1:
            if n % self.p:
                raise ValueError("ambient must be a p-group")
            n //= self.p
        for g in generators:
            g.check_homomorphism()
            if not (g.domain <= S and g.codomain <= S):
                raise ValueError("generator outside the ambient group")
        self.generators = list(generators)
        self._iso_cache: dict = {}
        self._sgens = None
        self._subgroups = None
        self._aut_s_cache: dict = {}

    # -- ambient helpers -------------------------------------------------

    def ambient_generators(self):
        if self._sgens is None:
            amb = self.ambient
            idx = amb.index()
            els = amb.elements()
            table = amb.dense_table()
            from plocal.groups import table_closure

            want = len(self.S)
            gens: list[int] = []
            have = {0}
            for x in self.S.elements:
                i = idx[x]
                if i not in have:
                    gens.append(i)
                    have = set(table_closure(table, gens))
                    if len(have) == want:
                        break
            self._sgens = [els[i] for i in gens]
        return self._sgens

    def subgroups(self) -> list[Subgroup]:
        """Every subgroup of S, sorted; cached."""
        if self._subgroups is None:
            amb = self.ambient
            idx = {x: i for i, x in enumerate(self.S.elements)}
            els = self.S.elements
            n = len(els)
            table = np.empty((n, n), dtype=np.int32)
            for i in range(n):
                for j in range(n):
                    table[i, j] = idx[amb.mul(els[i], els[j])]
            G = IndexedGroup(table, name="S")
            from plocal.groups import all_subgroups_p

            subs = all_subgroups_p(G, self.p)
            self._subgroups = [
                make_subgroup(amb, [els[i] for i in s], closed=True) for s in subs
            ]
            self._subgroups.sort(key=lambda h: (len(h), h.key()))
        return self._subgroups

    def subgroup_classes(self) -> list[list[Subgroup]]:
        """Subgroups of S grouped into F-conjugacy classes."""
        classes = []
        seen = set()
        for P in self.subgroups():
            if P.elements in seen:
                continue
            cls = self.fclass(P).members
            for Q in cls:
                seen.add(Q.elements)
            classes.append(cls)
        return classes

    # -- hom-set closure --------------------------------------------------

    def iso_maps(self, P: Subgroup) -> dict:
        """All F-isomorphisms out of P: dict image-subgroup -> sorted map list.

        Maps are image tuples aligned with P.elements.  The closure runs
        over element indices; moves are conjugation permutations and the
        (partial) generator maps with their inverses.
        """
        key = P.elements
        cached = self._iso_cache.get(key)
        if cached is not None:
            return cached
        amb = self.ambient
        idx = amb.index()
        els = amb.elements()
        start = tuple(idx[x] for x in P.elements)
        seen = {start}
        queue = [start]
        moves = self._moves()
        while queue:
            cur = queue.pop()
            for arr in moves:
                nxt = tuple(arr[i] for i in cur)
                if -1 in nxt or nxt in seen:
                    continue
                if len(seen) >= self.map_cap:
                    raise CapExceeded("hom-set closure exceeded map cap")
                seen.add(nxt)
                queue.append(nxt)
        by_image: dict = {}
        for m in seen:
            elm = tuple(els[i] for i in m)
            img = make_subgroup(amb, elm, closed=True)
            by_image.setdefault(img.elements, []).append(elm)
        out = {}
        for img_els, maps in by_image.items():
            sub = make_subgroup(amb, img_els, closed=True)
            out[sub] = sorted(maps, key=lambda t: tuple(amb.key(y) for y in t))
        self._iso_cache[key] = out
        return out

    def _moves(self):
        moves = self.__dict__.get("_move_cache")
        if moves is None:
            amb = self.ambient
            idx = amb.index()
            n = len(idx)
            conj = amb.conj_array()
            moves = []
            for s in self.ambient_generators():
                moves.append(conj[idx[s]].tolist())
                moves.append(conj[idx[amb.inv(s)]].tolist())
            for g in self.generators:
                for gg in (g, g.inverse_iso()):
                    arr = [-1] * n
                    for x, y in gg.lookup().items():
                        arr[idx[x]] = idx[y]
                    moves.append(arr)
            self.__dict__["_move_cache"] = moves
        return moves

    def hom_set(self, P: Subgroup, Q: Subgroup) -> list[FusionMorphism]:
        """The full Hom_F(P, Q), deterministic order."""
        out = []
        qset = Q.as_set()
        for img, maps in self.iso_maps(P).items():
            if img.as_set() <= qset:
                for m in maps:
                    out.append(FusionMorphism(P, Q, m))
        out.sort(key=lambda f: f.map_key())
        return out

    def iso_set(self, P: Subgroup, Q: Subgroup) -> list[FusionMorphism]:
        maps = self.iso_maps(P).get(Q, [])
        return [FusionMorphism(P, Q, m) for m in maps]

    def hom_count(self, P: Subgroup, Q: Subgroup) -> int:
        qset = Q.as_set()
        return sum(
            len(maps)
            for img, maps in self.iso_maps(P).items()
            if img.as_set() <= qset
        )

    # -- conjugacy and local structure ------------------------------------

    def fclass(self, P: Subgroup) -> "ConjClass":
        members = sorted(self.iso_maps(P).keys(), key=lambda h: h.key())
        rep = members[0]
        return ConjClass(rep, members)

    def aut(self, P: Subgroup) -> list[FusionMorphism]:
        return self.iso_set(P, P)

    def inn(self, P: Subgroup) -> list[FusionMorphism]:
        return self._conj_maps(P, P)

    def aut_S(self, P: Subgroup) -> list[FusionMorphism]:
        key = P.elements
        cached = self._aut_s_cache.get(key)
        if cached is None:
            cached = self._conj_maps(P, normalizer(P, within=self.S))
            self._aut_s_cache[key] = cached
        return cached

    def _conj_maps(self, P: Subgroup, by: Subgroup) -> list[FusionMorphism]:
        amb = self.ambient
        idx = amb.index()
        els = amb.elements()
        conj = amb.conj_array()
        pi = [idx[x] for x in P.elements]
        maps = set()
        for g in by.elements:
            row = conj[idx[g]]
            maps.add(tuple(els[row[i]] for i in pi))
        return [FusionMorphism(P, P, m) for m in sorted(maps)]

    def aut_group(self, P: Subgroup, maps: list[FusionMorphism] | None = None) -> IndexedGroup:
        """Aut_F(P) (or a subgroup of it) as an abstract indexed group."""
        maps = self.aut(P) if maps is None else maps
        els = [m.images for m in maps]
        dom = P.elements

        def mul(m1, m2):  # m1 after m2
            look = dict(zip(dom, m1))
            return tuple(look[y] for y in m2)

        return group_from_mul(els, mul, name=f"Aut({len(P)})")

    def out_group(self, P: Subgroup) -> IndexedGroup:
        """Out_F(P) = Aut_F(P)/Inn(P) as an abstract indexed group."""
        from plocal.groups import quotient_group

        auts = self.aut(P)
        G = self.aut_group(P, auts)
        inn_keys = {m.images for m in self.inn(P)}
        members = [i for i, lab in enumerate(G.labels) if lab in inn_keys]
        return quotient_group(G, members, name="Out")

    def is_fully_normalized(self, P: Subgroup) -> bool:
        mine = len(normalizer(P, within=self.S))
        return all(
            len(normalizer(Q, within=self.S)) <= mine for Q in self.fclass(P).members
        )

    def is_fully_centralized(self, P: Subgroup) -> bool:
        mine = len(centralizer(P, within=self.S))
        return all(
            len(centralizer(Q, within=self.S)) <= mine for Q in self.fclass(P).members
        )

    def is_centric(self, P: Subgroup) -> bool:
        cache = self.__dict__.setdefault("_centric_cache", {})
        hit = cache.get(P.elements)
        if hit is not None:
            return hit
        members = self.fclass(P).members
        verdict = all(
            centralizer(Q, within=self.S).as_set() <= Q.as_set() for Q in members
        )
        for Q in members:
            cache[Q.elements] = verdict
        return verdict

    def is_radical(self, P: Subgroup) -> bool:
        out = self.out_group(P)
        return len(o_p(out, self.p)) == 1

    # -- saturation -------------------------------------------------------

    def is_saturated(self, restrict_to: list[Subgroup] | None = None):
        """Check the Sylow and extension axioms; returns (bool, witness).

        The chain axiom is vacuous over a finite ambient group.  When
        ``restrict_to`` is given, only those classes are checked (the
        H-saturation of the Theorem-5A-style criterion).
        """
        classes = self.subgroup_classes()
        if restrict_to is not None:
            keep = {P.elements for P in restrict_to}
            classes = [cls for cls in classes if any(Q.elements in keep for Q in cls)]

        for cls in classes:
            fully_norm = [
                Q for Q in cls if self.is_fully_normalized(Q)
            ]
            for P in fully_norm:
                if not self.is_fully_centralized(P):
                    return False, ("axiom-I", P, "fully normalized but not fully centralized")
                n_inn = len(self.inn(P))
                out_order = len(self.aut(P)) // n_inn
                out_s_order = len(self.aut_S(P)) // n_inn
                # Out_S(P) is a p-group, so Sylow means it carries the full
                # p-part of Out_F(P).
                if out_s_order != _p_part(out_order, self.p):
                    return False, ("axiom-I", P, "Out_S not Sylow in Out_F")

        # Axiom II over S-class representatives (inner transfer is automatic).
        reps_seen = set()
        for cls in classes:
            for P in cls:
                canon = min(
                    self._s_class(P), key=lambda t: tuple(self.ambient.key(x) for x in t)
                )
                if canon in reps_seen:
                    continue
                reps_seen.add(canon)
                Pc = make_subgroup(self.ambient, canon, closed=True)
                for Q, maps in self.iso_maps(Pc).items():
                    if not self.is_fully_centralized(Q):
                        continue
                    for m in maps:
                        f = FusionMorphism(Pc, Q, m)
                        ok = self._extends_to_nf(f)
                        if not ok:
                            return False, ("axiom-II", f, "no extension to N_f")
        return True, None

    def _s_class(self, P: Subgroup):
        amb = self.ambient
        idx = amb.index()
        els = amb.elements()
        conj = amb.conj_array()
        perms = [conj[idx[s]].tolist() for s in self.ambient_generators()]
        start = tuple(sorted(idx[x] for x in P.elements))
        orbit = {start}
        frontier = [start]
        while frontier:
            cur = frontier.pop()
            for perm in perms:
                img = tuple(sorted(perm[i] for i in cur))
                if img not in orbit:
                    orbit.add(img)
                    frontier.append(img)
        return {tuple(els[i] for i in m) for m in orbit}

    def n_f(self, f: FusionMorphism) -> Subgroup:
        """N_f = {g in N_S(P) : f c_g f^{-1} is an S-conjugation of f(P)}."""
        amb = self.ambient
        idx = amb.index()
        conj = amb.conj_array()
        P = f.domain
        Q = f.image_subgroup()
        look_i = {idx[x]: idx[y] for x, y in f.lookup().items()}
        back_i = {y: x for x, y in look_i.items()}
        q_idx = [idx[q] for q in Q.elements]
        s_maps = {
            tuple(idx[y] for y in m.images) for m in self.aut_S(Q)
        }
        members = []
        for g in normalizer(P, within=self.S).elements:
            row = conj[idx[g]]
            twisted = tuple(look_i[row[back_i[q]]] for q in q_idx)
            if twisted in s_maps:
                members.append(g)
        return make_subgroup(amb, members, closed=True)

    def _extends_to_nf(self, f: FusionMorphism) -> bool:
        Nf = self.n_f(f)
        if Nf.elements == f.domain.elements:
            return True
        look = f.lookup()
        want = tuple(look[x] for x in f.domain.elements)
        for _, maps in self.iso_maps(Nf).items():
            for m in maps:
                ext = dict(zip(Nf.elements, m))
                if tuple(ext[x] for x in f.domain.elements) == want:
                    return True
        return False

    # -- derived local operators -------------------------------------------

    def kernel_K_P(self, P: Subgroup, P0: Subgroup) -> list[FusionMorphism]:
        """Automorphisms of P acting trivially on a characteristic normal
        P0 and on P/P0; always lands inside O_p(Out-side p-core)."""
        amb = self.ambient
        if not P0 <= P:
            raise ValueError("P0 must lie in P")
        pset = P0.as_set()
        for x in P.elements:
            if any(amb.conj(x, a) not in pset for a in P0.elements):
                raise ValueError("P0 must be normal in P")
        auts = self.aut(P)
        for f in auts:
            if set(f.restrict(P0).images) != pset:
                raise ValueError("P0 must be Aut_F(P)-invariant")
        out = []
        for f in auts:
            look = f.lookup()
            if any(look[a] != a for a in P0.elements):
                continue
            if all(amb.mul(look[x], amb.inv(x)) in pset for x in P.elements):
                out.append(f)
        return out

    def is_strongly_closed(self, R: Subgroup) -> bool:
        rset = R.as_set()
        amb = self.ambient
        for x in R.elements:
            if x == amb.identity():
                continue
            C = make_subgroup(amb, _elt_closure(amb, [x]), closed=True)
            for _, maps in self.iso_maps(C).items():
                pos = C.elements.index(x)
                for m in maps:
                    if m[pos] not in rset:
                        return False
        return True

    def strongly_closed_subgroups(self) -> list[Subgroup]:
        return [R for R in self.subgroups() if self.is_strongly_closed(R)]

    def rep_set(self, P: Subgroup, Q: Subgroup) -> list[FusionMorphism]:
        """Hom_F(P,Q) modulo post-composition with Inn(Q); canonical reps."""
        amb = self.ambient
        homs = {f.images: f for f in self.hom_set(P, Q)}
        out = []
        seen = set()
        for images in sorted(homs, key=lambda t: tuple(amb.key(y) for y in t)):
            if images in seen:
                continue
            orbit = set()
            for q in Q.elements:
                orbit.add(tuple(amb.conj(q, y) for y in images))
            seen |= orbit
            out.append(homs[images])
        return out

    # -- Alperin-style factorization ----------------------------------------

    def alperin_factorize(self, f: FusionMorphism, objects: list[Subgroup] | None = None):
        """Factor the iso part of f through automorphisms of centric subgroups.

        Returns a list of (U_j, phi_j) pairs whose composed restrictions
        equal f on its domain; the empty list when f is an inclusion.
        Raises CapExceeded when no factorization is found (non-saturated
        input or cap too small).
        """
        amb = self.ambient
        P = f.domain
        target = tuple(f.images)
        if target == P.elements:
            return []
        if objects is None:
            objects = [
                Q
                for cls in self.subgroup_classes()
                for Q in cls
                if self.is_centric(Q)
            ]
        objects = [U for U in objects if len(U) >= len(P)]
        start = P.elements
        prev: dict = {start: None}
        queue = [start]
        while queue:
            nxt_queue = []
            for cur in queue:
                cur_set = set(cur)
                for U in objects:
                    if not cur_set <= U.as_set():
                        continue
                    for phi in self.aut(U):
                        look = phi.lookup()
                        nxt = tuple(look[y] for y in cur)
                        if nxt not in prev:
                            prev[nxt] = (cur, U, phi)
                            if nxt == target:
                                return self._unwind(prev, target)
                            nxt_queue.append(nxt)
            queue = nxt_queue
        raise CapExceeded("factorization search failed")

    def _unwind(self, prev, target):
        steps = []
        cur = target
        while prev[cur] is not None:
            before, U, phi = prev[cur]
            steps.append((U, phi))
            cur = before
        steps.reverse()
        return steps

    # -- 5A-style saturation criterion ---------------------------------------

    def check_theorem5A(self, H: list[Subgroup]) -> dict:
        """Generation/saturation/p-core certificate over an object family H.

        H must be closed under F-conjugacy.  The verdict combines:
        H-generation of every generator, H-saturation, and a nontrivial
        p-core witness Out_S(Q) ∩ O_p(Out_F(Q)) != 1 for every F-centric
        class outside H.
        """
        report = {"generated": True, "saturated": True, "cores": True, "witnesses": []}
        hkeys = {P.elements for P in H}
        for P in H:
            for Q in self.fclass(P).members:
                if Q.elements not in hkeys:
                    raise ValueError("H is not closed under F-conjugacy")

        sub_f = FusionSystem(self.S, self._h_generators(H), p=self.p, map_cap=self.map_cap)
        for g in self.generators:
            if not _morphism_in(sub_f, g):
                report["generated"] = False
                report["witnesses"].append(("generation", g))

        ok, witness = self.is_saturated(restrict_to=H)
        if not ok:
            report["saturated"] = False
            report["witnesses"].append(("saturation", witness))

        for cls in self.subgroup_classes():
            if cls[0].elements in hkeys:
                continue
            if not self.is_centric(cls[0]):
                continue
            if not any(self._has_core_witness(Q) for Q in cls):
                report["cores"] = False
                report["witnesses"].append(("core", cls[0]))
        report["pass"] = report["generated"] and report["saturated"] and report["cores"]
        return report

    def _h_generators(self, H: list[Subgroup]) -> list[FusionMorphism]:
        """Maps between H-members (image allowed inside a member)."""
        gens = []
        hsets = [U.as_set() for U in H]
        for P in H:
            for Q, maps in self.iso_maps(P).items():
                qset = Q.as_set()
                if not any(qset <= u for u in hsets):
                    continue
                for m in maps:
                    gens.append(FusionMorphism(P, self.S, m))
        return gens

    def _has_core_witness(self, Q: Subgroup) -> bool:
        """Out_S(Q) ∩ O_p(Out_F(Q)) nontrivial?"""
        auts = self.aut(Q)
        G = self.aut_group(Q, auts)
        pos = {lab: i for i, lab in enumerate(G.labels)}
        inn_idx = sorted(pos[m.images] for m in self.inn(Q))
        from plocal.groups import quotient_group

        out = quotient_group(G, inn_idx)
        core = set(o_p(out, self.p))
        if len(core) == 1:
            return False
        # image of Aut_S(Q) in Out
        s_reps = set()
        rep_of = _coset_map(G, inn_idx)
        for m in self.aut_S(Q):
            s_reps.add(rep_of[pos[m.images]])
        core_reps = {out.labels[i] for i in core}
        hit = (s_reps & core_reps) - {rep_of[0]}
        return bool(hit)


def _coset_map(G: IndexedGroup, members: list[int]) -> dict:
    rep_of = {}
    for g in range(G.order):
        if g in rep_of:
            continue
        coset = sorted(G.mul(g, h) for h in members)
        for x in coset:
            rep_of[x] = coset[0]
    return rep_of


def _morphism_in(F: FusionSystem, f: FusionMorphism) -> bool:
    maps = F.iso_maps(f.domain)
    img = f.image_subgroup()
    return f.images in set(maps.get(img, []))


@dataclass(frozen=True)
class ConjClass:
    representative: Subgroup
    members: list

    def __len__(self):
        return len(self.members)


def _p_part(n: int, p: int) -> int:
    return p ** padic_valuation(n, p) if n else 0


def _elt_closure(amb, gens):
    out = {amb.identity()}
    frontier = list(gens)
    out |= set(frontier)
    while frontier:
        g = frontier.pop()
        for h in list(out):
            for prod_ in (amb.mul(g, h), amb.mul(h, g)):
                if prod_ not in out:
                    out.add(prod_)
                    frontier.append(prod_)
    return out


# -- fusion systems of finite groups (test oracles) ------------------------


def fusion_of_group(G: IndexedGroup, p: int, name: str | None = None) -> FusionSystem:
    """The fusion system of G on a Sylow p-subgroup, closure-generated
    from all conjugation maps into the Sylow."""
    from plocal.groups import IndexedCarrier, sylow_subgroup

    carrier = IndexedCarrier(G)
    syl = sylow_subgroup(G, p)
    S = make_subgroup(carrier, syl, closed=True)
    sset = S.as_set()
    gens = []
    seen = set()
    for g in range(G.order):
        # domain = S ∩ g^{-1} S g, a subgroup
        dom = tuple(sorted(x for x in syl if G.conj(g, x) in sset))
        images = tuple(G.conj(g, x) for x in dom)
        key = (dom, images)
        if key in seen or dom == images:
            continue
        seen.add(key)
        gens.append(FusionMorphism(make_subgroup(carrier, dom), S, images))
    return FusionSystem(S, gens, p=p, name=name or f"F_{G.name}")


def conjugation_hom_set(G: IndexedGroup, S: Subgroup, P: Subgroup, Q: Subgroup):
    """Oracle: maps P -> Q induced by G-conjugation (deduplicated)."""
    qset = Q.as_set()
    maps = set()
    for g in range(G.order):
        images = tuple(G.conj(g, x) for x in P.elements)
        if all(y in qset for y in images):
            maps.add(images)
    return sorted(maps)

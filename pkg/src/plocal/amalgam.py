"""Transporter systems presented by automorphism groups at class
representatives.

A system is stored as one group A_R per S-conjugacy class of objects,
with structural maps ε_R : N_S(R) -> A_R and ρ_R : A_R -> Aut_F(R).
Every morphism P -> Q has the normal form ε(g) ∘ (u_P-transport of a),
a ∈ A_R, and two normal forms describe one morphism exactly when they
differ by the N_S(R)-rewrite (g, a) ~ (g·u h^{-1} u^{-1}, ε_R(h)·a).

Composition closes because non-inner cores are only allowed at classes
that are minimal among objects (checked at construction): a composite
either absorbs an inner core into its ε-part, or stays inside one class.
This is the finite shape of Alperin-style generation and covers every
system in scope; inputs outside it are rejected.

Isotypical operations act by mapping every ε(s) to ε(ψ(s)) and fixing a
chosen section of each exotic automorphism group; the compatibility of
this action with the tables is verified when the action is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from plocal.bullet import RetractionPair
from plocal.fusion import FusionMorphism, FusionSystem
from plocal.groups import IndexedGroup
from plocal.ptoral import Subgroup, make_subgroup, normalizer, transporter_set
from plocal.transporter import TMor, TransporterError


@dataclass
class ClassData:
    """Automorphism-group data at one class representative."""

    rep: Subgroup
    A: IndexedGroup
    eps_idx: dict  # element of N_S(rep) -> index in A
    rho_maps: list  # index in A -> FusionMorphism rep -> rep
    trusted: bool = False  # built internally from conjugation data

    def validate(self, fusion: FusionSystem):
        if self.trusted:
            # built from the ambient's own conjugation tables; only the
            # ρ-surjectivity condition involves outside data
            aut_imgs = {f.images for f in fusion.iso_set(self.rep, self.rep)}
            rho_imgs = {f.images for f in self.rho_maps}
            if rho_imgs != aut_imgs:
                raise TransporterError(
                    "normalizer conjugation does not realize Aut_F(rep); "
                    "hand data required at this class"
                )
            return
        self._validate_full(fusion)

    def _validate_full(self, fusion: FusionSystem):
        amb = self.rep.ambient
        N = normalizer(self.rep, within=fusion.S)
        if set(self.eps_idx) != set(N.elements):
            raise TransporterError("eps must be defined exactly on N_S(rep)")
        if len(set(self.eps_idx.values())) != len(N):
            raise TransporterError("eps must be injective")
        if self.eps_idx[amb.identity()] != 0:
            raise TransporterError("eps must send 1 to the identity")
        for g in N.elements:
            for h in N.elements:
                if self.A.mul(self.eps_idx[g], self.eps_idx[h]) != self.eps_idx[amb.mul(g, h)]:
                    raise TransporterError("eps is not a homomorphism")
        if len(self.rho_maps) != self.A.order:
            raise TransporterError("rho must be defined on all of A")
        aut_imgs = {f.images for f in fusion.iso_set(self.rep, self.rep)}
        rho_imgs = {f.images for f in self.rho_maps}
        if rho_imgs != aut_imgs:
            raise TransporterError("rho must surject onto Aut_F(rep)")
        looks = [f.lookup() for f in self.rho_maps]
        for a in range(self.A.order):
            fa = looks[a]
            for b in range(self.A.order):
                fb = looks[b]
                fab = looks[self.A.mul(a, b)]
                if any(fab[x] != fa[fb[x]] for x in self.rep.elements):
                    raise TransporterError("rho is not a functor")
        for g in N.elements:
            want = tuple(amb.conj(g, x) for x in self.rep.elements)
            if self.rho_maps[self.eps_idx[g]].images != want:
                raise TransporterError("rho(eps(g)) must be conjugation by g")
        # structural relation behind axiom (C): a ε(h) a^{-1} = ε(ρ(a) h)
        for a in range(self.A.order):
            fa = self.rho_maps[a].lookup()
            for h in self.rep.elements:
                lhs = self.A.mul(a, self.eps_idx[h])
                rhs = self.A.mul(self.eps_idx[fa[h]], a)
                if lhs != rhs:
                    raise TransporterError(
                        "automorphism tables violate the conjugation relation"
                    )

    def is_exotic(self) -> bool:
        return self.A.order > len(self.eps_idx)


def inner_class_data(fusion: FusionSystem, rep: Subgroup) -> ClassData:
    """Default data: A = N_S(rep) with ε the identity and ρ conjugation.
    Valid exactly when Aut_F(rep) is induced by the normalizer."""
    import numpy as np

    from plocal.groups import IndexedGroup

    amb = rep.ambient
    N = normalizer(rep, within=fusion.S)
    idx = amb.index()
    els_all = amb.elements()
    table = amb.dense_table()
    conj = amb.conj_array()
    # put the identity first, then key order
    members = [idx[g] for g in N.elements]
    local = {g: i for i, g in enumerate(members)}
    narr = np.fromiter(members, dtype=np.int32)
    sub_table = table[np.ix_(narr, narr)]
    lut = np.full(table.shape[0], -1, dtype=np.int32)
    lut[narr] = np.arange(len(members), dtype=np.int32)
    A = IndexedGroup(lut[sub_table], name="N", labels=[els_all[g] for g in members])
    eps_idx = {els_all[g]: local[g] for g in members}
    rep_idx = [idx[x] for x in rep.elements]
    rho_maps = [
        FusionMorphism(
            rep, rep, tuple(els_all[conj[g][i]] for i in rep_idx)
        )
        for g in members
    ]
    return ClassData(rep, A, eps_idx, rho_maps, trusted=True)


class AmalgamTransporter:
    """The transporter category on the star-image objects, presented by
    per-class automorphism data."""

    def __init__(self, fusion: FusionSystem, pair: RetractionPair,
                 hand_data: list[ClassData] | None = None,
                 objects: list[Subgroup] | None = None, validate: bool = True):
        self.fusion = fusion
        self.pair = pair
        self.S = fusion.S
        self.p = fusion.p
        amb = self.S.ambient
        self.amb = amb

        if objects is None:
            objects = [
                Q for Q in pair.star_objects() if fusion.is_centric(Q)
            ]
        self._objects = sorted(objects, key=lambda h: (len(h), h.key()))
        self._object_keys = {P.elements for P in self._objects}

        # partition into S-classes, pick canonical reps, record transporters
        self._class_of: dict = {}
        self._u_of: dict = {}
        self.classes: list[ClassData] = []
        hand = {cd.rep.elements: cd for cd in (hand_data or [])}
        remaining = {P.elements: P for P in self._objects}
        while remaining:
            rep_key = min(remaining, key=lambda k: remaining[k].key())
            rep = remaining[rep_key]
            members = self._s_orbit(rep)
            cid = len(self.classes)
            for key, u in members.items():
                if key not in remaining:
                    raise TransporterError("object family not closed under S-conjugacy")
                self._class_of[key] = cid
                self._u_of[key] = u
                del remaining[key]
            cd = hand.get(rep_key)
            if cd is None:
                cd = inner_class_data(fusion, rep)
            elif cd.rep.elements != rep_key:
                raise TransporterError("hand data must sit at the canonical class rep")
            if validate:
                cd.validate(fusion)
            self.classes.append(cd)

        if validate:
            self._validate_minimality()
        self._eps_image: list[dict] = []
        for cd in self.classes:
            self._eps_image.append({v: k for k, v in cd.eps_idx.items()})
        self._sections: list[dict | None] = [None] * len(self.classes)
        self._mor_cache: dict = {}
        self._nf_cache: dict = {}
        self._tset_cache: dict = {}
        self._shift_cache: dict = {}
        # index-level arithmetic (the inner loops run on these)
        self._idx = amb.index()
        self._els = amb.elements()
        self._table = amb.dense_table()
        self._conj = amb.conj_array()
        self._invarr = amb.inv_array()

    def _mul(self, a, b):
        return self._els[self._table[self._idx[a], self._idx[b]]]

    def _invel(self, a):
        return self._els[self._invarr[self._idx[a]]]

    def _conjel(self, g, x):
        return self._els[self._conj[self._idx[g], self._idx[x]]]

    def _orbit_shifts(self, cid: int, src_key):
        out = self._shift_cache.get((cid, src_key))
        if out is None:
            cd = self.classes[cid]
            u = self._u_of[src_key]
            out = [
                (self._conjel(u, self._invel(h)), eh)
                for h, eh in cd.eps_idx.items()
            ]
            self._shift_cache[(cid, src_key)] = out
        return out

    # -- construction internals ------------------------------------------

    def _s_orbit(self, rep: Subgroup) -> dict:
        amb = self.amb
        out = {rep.elements: amb.identity()}
        frontier = [rep]
        gens = self.fusion.ambient_generators()
        while frontier:
            cur = frontier.pop(0)
            u_cur = out[cur.elements]
            for s in gens + [amb.inv(g) for g in gens]:
                img = make_subgroup(amb, [amb.conj(s, x) for x in cur.elements], closed=True)
                if img.elements not in out:
                    out[img.elements] = amb.mul(s, u_cur)
                    frontier.append(img)
        return out

    def _validate_minimality(self):
        for cid, cd in enumerate(self.classes):
            if not cd.is_exotic():
                continue
            for key in self._object_keys:
                if self._class_of[key] != cid:
                    continue
                member = set(key)
                for other in self._object_keys:
                    if other != key and set(other) < member:
                        raise TransporterError(
                            "non-inner automorphism data at a non-minimal class"
                        )

    # -- protocol ----------------------------------------------------------

    def objects(self) -> list[Subgroup]:
        return list(self._objects)

    def is_object(self, P: Subgroup) -> bool:
        return P.elements in self._object_keys

    def class_of(self, P: Subgroup) -> int:
        cid = self._class_of.get(P.elements)
        if cid is None:
            raise TransporterError("not an object of this system")
        return cid

    def _normalize(self, cid: int, src: Subgroup, g, a: int):
        """Canonical orbit representative: the unique pair with trivial
        core when the core is inner, else the key-minimal pair (exotic
        classes have small normalizers, so the scan is cheap)."""
        cd = self.classes[cid]
        inner = self._eps_image[cid].get(a)
        if inner is not None:
            if a == 0:
                return (cid, g, 0)
            u = self._u_of[src.elements]
            g2 = self._mul(g, self._conjel(u, inner))
            return (cid, g2, 0)
        ckey = (cid, src.elements, g, a)
        out = self._nf_cache.get(ckey)
        if out is not None:
            return out
        best = None
        idx = self._idx
        for shift, eh in self._orbit_shifts(cid, src.elements):
            g2 = self._mul(g, shift)
            a2 = cd.A.mul(eh, a)
            key = (idx[g2], a2)
            if best is None or key < best[0]:
                best = (key, (cid, g2, a2))
        self._nf_cache[ckey] = best[1]
        return best[1]

    def _tset(self, P: Subgroup, Q: Subgroup):
        key = (P.elements, Q.elements)
        out = self._tset_cache.get(key)
        if out is None:
            out = transporter_set(P, Q, within=self.S)
            self._tset_cache[key] = out
        return out

    def mor(self, P: Subgroup, Q: Subgroup) -> list[TMor]:
        key = (P.elements, Q.elements)
        out = self._mor_cache.get(key)
        if out is None:
            cid = self.class_of(P)
            self.class_of(Q)
            cd = self.classes[cid]
            if not cd.is_exotic():
                # every morphism has the unique form (g, identity core)
                out = [TMor(P, Q, (cid, g, 0)) for g in self._tset(P, Q)]
                out.sort(key=lambda m: self.amb.key(m.data[1]))
            else:
                seen = {}
                for g in self._tset(P, Q):
                    for a in range(cd.A.order):
                        data = self._normalize(cid, P, g, a)
                        if data not in seen:
                            seen[data] = TMor(P, Q, data)
                out = sorted(
                    seen.values(), key=lambda m: (self.amb.key(m.data[1]), m.data[2])
                )
            self._mor_cache[key] = out
        return out

    def compose(self, phi2: TMor, phi1: TMor) -> TMor:
        if phi1.dst.elements != phi2.src.elements:
            raise TransporterError("morphisms not composable")
        c1, g1, a1 = phi1.data
        c2, g2, a2 = phi2.data
        uQ = self._u_of[phi2.src.elements]
        inner = self._eps_image[c2].get(a2)
        if inner is not None:
            G = self._mul(self._mul(g2, self._conjel(uQ, inner)), g1)
            data = self._normalize(c1, phi1.src, G, a1)
            return TMor(phi1.src, phi2.dst, data)
        if c1 != c2:
            raise TransporterError("non-inner composite across classes")
        cd = self.classes[c1]
        uP = self._u_of[phi1.src.elements]
        h = self._mul(self._mul(self._invel(uQ), g1), uP)
        eh = cd.eps_idx.get(h)
        if eh is None:
            raise TransporterError("composite does not normalize the representative")
        a3 = cd.A.mul(cd.A.mul(a2, eh), a1)
        G = self._mul(g2, self._mul(uQ, self._invel(uP)))
        data = self._normalize(c1, phi1.src, G, a3)
        return TMor(phi1.src, phi2.dst, data)

    def eps(self, P: Subgroup, Q: Subgroup, g) -> TMor:
        idx = self._idx
        conj_row = self._conj[idx[g]]
        q_idx = {idx[x] for x in Q.elements}
        if not all(conj_row[idx[x]] in q_idx for x in P.elements):
            raise TransporterError("element does not transport P into Q")
        cid = self.class_of(P)
        return TMor(P, Q, self._normalize(cid, P, g, 0))

    def _rho_arrays(self, cid: int):
        """Per-class index arrays of ρ(a) on the representative."""
        cache = self.__dict__.setdefault("_rho_arr_cache", {})
        out = cache.get(cid)
        if out is None:
            idx = self.amb.index()
            n = len(idx)
            cd = self.classes[cid]
            out = []
            for f in cd.rho_maps:
                arr = [-1] * n
                for x, y in f.lookup().items():
                    arr[idx[x]] = idx[y]
                out.append(arr)
            cache[cid] = out
        return out

    def image_indices(self, data, src_key, idx_list: list[int]) -> list[int]:
        """Images under the underlying fusion map, on element indices."""
        cid, g, a = data
        amb = self.amb
        idx = amb.index()
        conj = amb.conj_array()
        u = self._u_of[src_key]
        if a == 0:
            row = conj[idx[g]]
            return [int(row[i]) for i in idx_list]
        arr = self._rho_arrays(cid)[a]
        back = conj[idx[amb.inv(u)]]
        fwd = conj[idx[amb.mul(g, u)]]
        return [int(fwd[arr[back[i]]]) for i in idx_list]

    def rho(self, phi: TMor) -> FusionMorphism:
        amb = self.amb
        idx = amb.index()
        els = amb.elements()
        src_idx = [idx[x] for x in phi.src.elements]
        images = self.image_indices(phi.data, phi.src.elements, src_idx)
        return FusionMorphism(phi.src, phi.dst, tuple(els[i] for i in images))

    def identity(self, P: Subgroup) -> TMor:
        return self.eps(P, P, self.amb.identity())

    def is_iso(self, phi: TMor) -> bool:
        return set(self.rho(phi).images) == phi.dst.as_set()

    def inverse(self, phi: TMor) -> TMor:
        if not self.is_iso(phi):
            raise TransporterError("morphism is not an isomorphism")
        cid, g, a = phi.data
        cd = self.classes[cid]
        uP = self._u_of[phi.src.elements]
        uQ = self._u_of[phi.dst.elements]
        h = self._mul(self._mul(self._invel(uP), self._invel(g)), uQ)
        eh = cd.eps_idx.get(h)
        if eh is None:
            raise TransporterError("inverse does not normalize the representative")
        a2 = cd.A.mul(cd.A.inv(a), eh)
        g2 = self._mul(uP, self._invel(uQ))
        data = self._normalize(cid, phi.dst, g2, a2)
        return TMor(phi.dst, phi.src, data)

    # -- isotypical actions -------------------------------------------------

    def isotypical_action(self, elt_map, check: bool = True):
        """Build the action of an isotypical automorphism given by an
        ambient element map (ε(s) -> ε(ψ s), exotic sections fixed)."""
        amb = self.amb
        psi_a: list[dict | None] = [None] * len(self.classes)
        for cid, cd in enumerate(self.classes):
            if not cd.is_exotic():
                continue
            rep_img = {elt_map(x) for x in cd.rep.elements}
            if rep_img != cd.rep.as_set():
                raise TransporterError(
                    "exotic class representative is not invariant under the operation"
                )
            section = self._section(cid)
            table = {}
            for a in range(cd.A.order):
                h, m = section[a]
                table[a] = cd.A.mul(cd.eps_idx[elt_map(h)], m)
            if check:
                for a in range(cd.A.order):
                    for b in range(cd.A.order):
                        if table[cd.A.mul(a, b)] != cd.A.mul(table[a], table[b]):
                            raise TransporterError(
                                "operation is incompatible with the automorphism tables"
                            )
            psi_a[cid] = table

        sub_cache: dict = {}

        def mapped_subgroup(P: Subgroup) -> Subgroup:
            out = sub_cache.get(P.elements)
            if out is None:
                out = make_subgroup(amb, [elt_map(x) for x in P.elements], closed=True)
                sub_cache[P.elements] = out
            return out

        def act(phi: TMor) -> TMor:
            cid, g, a = phi.data
            cd = self.classes[cid]
            src2 = mapped_subgroup(phi.src)
            dst2 = mapped_subgroup(phi.dst)
            inner = self._eps_image[cid].get(a)
            if inner is not None:
                u = self._u_of[phi.src.elements]
                G = self._mul(g, self._conjel(u, inner))
                cid2 = self.class_of(src2)
                data = self._normalize(cid2, src2, elt_map(G), 0)
                return TMor(src2, dst2, data)
            table = psi_a[cid]
            uP = self._u_of[phi.src.elements]
            uP2 = self._u_of[src2.elements]
            h0 = self._mul(self._invel(uP2), elt_map(uP))
            eh0 = cd.eps_idx.get(h0)
            if eh0 is None:
                raise TransporterError("operation moves the transporter out of range")
            a2 = cd.A.mul(cd.A.mul(eh0, table[a]), cd.A.inv(eh0))
            data = self._normalize(cid, src2, elt_map(g), a2)
            return TMor(src2, dst2, data)

        return act

    def _section(self, cid: int) -> dict:
        sec = self._sections[cid]
        if sec is None:
            cd = self.classes[cid]
            eps_vals = sorted(cd.eps_idx.values())
            sec = {}
            coset_min: dict = {}
            for a in range(cd.A.order):
                coset = sorted(cd.A.mul(e, a) for e in eps_vals)
                m = coset_min.setdefault(tuple(coset), coset[0])
            for a in range(cd.A.order):
                coset = tuple(sorted(cd.A.mul(e, a) for e in eps_vals))
                m = coset_min[coset]
                # a = eps(h) * m for a unique h
                target = cd.A.mul(a, cd.A.inv(m))
                h = self._eps_image[cid].get(target)
                if h is None:
                    raise TransporterError("section decomposition failed")
                sec[a] = (h, m)
            self._sections[cid] = sec
        return sec


class TelescopicView:
    """Objects are subgroups whose star is a core object; morphisms are
    the core morphisms whose fusion image respects the smaller target."""

    def __init__(self, core: AmalgamTransporter):
        self.core = core
        self.fusion = core.fusion
        self.S = core.S
        self.p = core.p
        self.amb = core.amb
        self.pair = core.pair
        self._objects = None
        self._mor_cache: dict = {}

    def objects(self) -> list[Subgroup]:
        if self._objects is None:
            out = []
            for P in self.fusion.subgroups():
                if self.is_object(P):
                    out.append(P)
            self._objects = out
        return list(self._objects)

    def is_object(self, P: Subgroup) -> bool:
        return self.pair.star(P).elements in self.core._object_keys

    def mor(self, P: Subgroup, Q: Subgroup) -> list[TMor]:
        key = (P.elements, Q.elements)
        cached = self._mor_cache.get(key)
        if cached is None:
            Ps, Qs = self.pair.star(P), self.pair.star(Q)
            idx = self.amb.index()
            p_idx = [idx[x] for x in P.elements]
            q_idx = {idx[x] for x in Q.elements}
            cached = []
            for phi in self.core.mor(Ps, Qs):
                imgs = self.core.image_indices(phi.data, Ps.elements, p_idx)
                if all(i in q_idx for i in imgs):
                    cached.append(TMor(P, Q, phi.data))
            self._mor_cache[key] = cached
        return list(cached)

    def _core_mor(self, phi: TMor) -> TMor:
        return TMor(self.pair.star(phi.src), self.pair.star(phi.dst), phi.data)

    def compose(self, phi2: TMor, phi1: TMor) -> TMor:
        if phi1.dst.elements != phi2.src.elements:
            raise TransporterError("morphisms not composable")
        out = self.core.compose(self._core_mor(phi2), self._core_mor(phi1))
        return TMor(phi1.src, phi2.dst, out.data)

    def eps(self, P: Subgroup, Q: Subgroup, g) -> TMor:
        amb = self.amb
        qset = Q.as_set()
        if not all(amb.conj(g, x) in qset for x in P.elements):
            raise TransporterError("element does not transport P into Q")
        out = self.core.eps(self.pair.star(P), self.pair.star(Q), g)
        return TMor(P, Q, out.data)

    def rho(self, phi: TMor) -> FusionMorphism:
        idx = self.amb.index()
        els = self.amb.elements()
        p_idx = [idx[x] for x in phi.src.elements]
        Ps = self.pair.star(phi.src)
        images = self.core.image_indices(phi.data, Ps.elements, p_idx)
        return FusionMorphism(phi.src, phi.dst, tuple(els[i] for i in images))

    def identity(self, P: Subgroup) -> TMor:
        return self.eps(P, P, self.amb.identity())

    def is_iso(self, phi: TMor) -> bool:
        return set(self.rho(phi).images) == phi.dst.as_set()

    def inverse(self, phi: TMor) -> TMor:
        if not self.is_iso(phi):
            raise TransporterError("morphism is not an isomorphism")
        out = self.core.inverse(self._core_mor(phi))
        return TMor(phi.dst, phi.src, out.data)

    def isotypical_action(self, elt_map, check: bool = True):
        core_act = self.core.isotypical_action(elt_map, check=check)
        sub_cache: dict = {}

        def mapped_subgroup(P: Subgroup) -> Subgroup:
            out = sub_cache.get(P.elements)
            if out is None:
                out = make_subgroup(
                    self.amb, [elt_map(x) for x in P.elements], closed=True
                )
                sub_cache[P.elements] = out
            return out

        def act(phi: TMor) -> TMor:
            out = core_act(self._core_mor(phi))
            src2 = mapped_subgroup(phi.src)
            dst2 = mapped_subgroup(phi.dst)
            if self.pair.star(src2).elements != out.src.elements:
                raise TransporterError("operation does not commute with the star map")
            return TMor(src2, dst2, out.data)

        return act


def telescopic_extend(core: AmalgamTransporter, pair: RetractionPair | None = None) -> TelescopicView:
    """Telescopic extension of the core system along its retraction pair.

    Restriction to the old objects is the identity on morphism data, and
    the star map extends to the new objects by construction.
    """
    if pair is not None and pair is not core.pair:
        raise TransporterError("retraction pair does not match the core system")
    return TelescopicView(core)

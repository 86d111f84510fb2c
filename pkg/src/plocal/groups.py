"""Generic finite groups over element indices, plus the test corpus.

An IndexedGroup is a finite group whose elements are 0..n-1 with index 0
the identity.  It is the common substrate for Sylow/O_p computations,
automizer signatures and bar-resolution cohomology, independent of how
the group arose (p-toral truncation, permutations, map sets, tables).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from plocal.arith import padic_valuation

try:
    from plocal import _kernels as _K
except ImportError:  # pragma: no cover
    _K = None


@dataclass
class IndexedGroup:
    """Finite group presented by a dense multiplication table."""

    table: np.ndarray
    name: str = "G"
    labels: list | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = self.table.shape[0]
        if self.table.shape != (n, n):
            raise ValueError("table must be square")
        if any(self.table[0, j] != j or self.table[j, 0] != j for j in range(n)):
            raise ValueError("identity must be index 0")

    @property
    def order(self) -> int:
        return int(self.table.shape[0])

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inv(self, a: int) -> int:
        invs = self._cache.get("inv")
        if invs is None:
            n = self.order
            invs = [0] * n
            for i in range(n):
                for j in range(n):
                    if self.table[i, j] == 0:
                        invs[i] = j
                        break
            self._cache["inv"] = invs
        return invs[a]

    def conj(self, g: int, x: int) -> int:
        return self.mul(self.mul(g, x), self.inv(g))

    def element_order(self, a: int) -> int:
        n = 1
        x = a
        while x != 0:
            x = self.mul(x, a)
            n += 1
        return n

    def exponent(self) -> int:
        exp = 1
        for a in range(self.order):
            exp = _lcm(exp, self.element_order(a))
        return exp

    def closure(self, seed) -> list[int]:
        """Sorted subgroup generated by the seed indices."""
        if _K is not None and self.table.dtype == np.int32:
            return list(_K.closure_indices(self.table, list(seed)))
        member = {0}
        elems = [0]
        frontier = []
        for g in seed:
            if g not in member:
                member.add(g)
                elems.append(g)
                frontier.append(g)
        i = 0
        while i < len(frontier):
            g = frontier[i]
            i += 1
            for h in list(elems):
                for p in (self.mul(g, h), self.mul(h, g)):
                    if p not in member:
                        member.add(p)
                        elems.append(p)
                        frontier.append(p)
        return sorted(member)

    def is_abelian(self) -> bool:
        n = self.order
        return all(
            self.table[i, j] == self.table[j, i] for i in range(n) for j in range(i)
        )

    def conjugate_set(self, g: int, xs) -> tuple[int, ...]:
        return tuple(sorted(self.conj(g, x) for x in xs))


def table_closure(table: np.ndarray, seed) -> list[int]:
    """Subgroup closure of seed indices over a dense table (index 0 the
    identity); compiled kernel when available."""
    if _K is not None and table.dtype == np.int32:
        return list(_K.closure_indices(table, list(seed)))
    member = {0}
    elems = [0]
    frontier = [g for g in seed if g not in member]
    for g in frontier:
        member.add(g)
        elems.append(g)
    i = 0
    while i < len(frontier):
        g = frontier[i]
        i += 1
        for h in list(elems):
            for p in (int(table[g, h]), int(table[h, g])):
                if p not in member:
                    member.add(p)
                    elems.append(p)
                    frontier.append(p)
    return sorted(member)


def group_from_mul(elements: list, mul, name: str = "G") -> IndexedGroup:
    """Index an explicit element list under a multiplication callback.

    The identity is detected and moved to index 0.
    """
    els = list(elements)
    ident = None
    for e in els:
        if all(mul(e, x) == x and mul(x, e) == x for x in els[: min(4, len(els))]):
            if all(mul(e, x) == x for x in els):
                ident = e
                break
    if ident is None:
        raise ValueError("no identity found")
    els.remove(ident)
    els.insert(0, ident)
    idx = {e: i for i, e in enumerate(els)}
    n = len(els)
    table = np.empty((n, n), dtype=np.int32)
    for i in range(n):
        for j in range(n):
            table[i, j] = idx[mul(els[i], els[j])]
    return IndexedGroup(table, name=name, labels=els)


def subgroup_of(G: IndexedGroup, members, name: str = "H") -> IndexedGroup:
    """The subgroup on the given member indices as its own IndexedGroup."""
    members = sorted(set(members))
    if 0 not in members:
        raise ValueError("subgroup must contain the identity")
    pos = {g: i for i, g in enumerate(members)}
    n = len(members)
    table = np.empty((n, n), dtype=np.int32)
    for i, a in enumerate(members):
        for j, b in enumerate(members):
            p = G.mul(a, b)
            if p not in pos:
                raise ValueError("member set not closed")
            table[i, j] = pos[p]
    labels = [G.labels[g] for g in members] if G.labels else list(members)
    return IndexedGroup(table, name=name, labels=labels)


# -- subgroup machinery ------------------------------------------------


def all_subgroups_p(G: IndexedGroup, p: int, cap: int = 40000) -> list[tuple[int, ...]]:
    """Every subgroup of a finite p-group, layered by order: a subgroup of
    order p^(k+1) is H·<g> for a maximal normal H and g in N(H) with
    g^p in H.  Normalizer scans are vectorized over the table."""
    n = G.order
    table = np.asarray(G.table)
    inv = np.array([G.inv(i) for i in range(n)], dtype=table.dtype)
    out = {(0,)}
    layer = [(0,)]
    while layer:
        nxt = set()
        for H in layer:
            harr = np.fromiter(H, dtype=table.dtype)
            member = np.zeros(n, dtype=bool)
            member[harr] = True
            # conj[g, i] = g * H[i] * g^{-1}
            conj = table[table[np.arange(n)[:, None], harr], inv[np.arange(n)][:, None]]
            normalizes = member[conj].all(axis=1)
            normalizes[harr] = False  # extensions need g outside H
            for g in np.nonzero(normalizes)[0]:
                gp = int(g)
                # p-th power must fall back into H
                acc = gp
                for _ in range(p - 1):
                    acc = G.mul(acc, gp)
                if not member[acc]:
                    continue
                cosets = set(H)
                cur = H
                power = gp
                for _ in range(p - 1):
                    cosets.update(int(table[power, h]) for h in H)
                    power = G.mul(power, gp)
                K = tuple(sorted(cosets))
                if len(K) == len(H) * p and K not in out:
                    if len(out) >= cap:
                        raise RuntimeError("subgroup enumeration cap exceeded")
                    out.add(K)
                    nxt.add(K)
        layer = sorted(nxt)
    return sorted(out, key=lambda s: (len(s), s))


def all_subgroups(G: IndexedGroup, cap: int = 40000) -> list[tuple[int, ...]]:
    """Every subgroup of G as a sorted index tuple (layered join closure)."""
    cyclic = set()
    for a in range(G.order):
        cyclic.add(tuple(G.closure([a])))
    known = set(cyclic)
    frontier = list(cyclic)
    while frontier:
        base = frontier.pop()
        for a in range(G.order):
            if a in base:
                continue
            ext = tuple(G.closure(list(base) + [a]))
            if ext not in known:
                if len(known) >= cap:
                    raise RuntimeError("subgroup enumeration cap exceeded")
                known.add(ext)
                frontier.append(ext)
    return sorted(known, key=lambda s: (len(s), s))


def conjugacy_classes_of_subgroups(
    G: IndexedGroup, subs: list[tuple[int, ...]] | None = None
) -> list[list[tuple[int, ...]]]:
    subs = all_subgroups(G) if subs is None else subs
    seen = set()
    classes = []
    subset = set(subs)
    for s in subs:
        if s in seen:
            continue
        orbit = {s}
        frontier = [s]
        while frontier:
            cur = frontier.pop()
            for g in range(G.order):
                img = G.conjugate_set(g, cur)
                if img not in orbit:
                    if img not in subset:
                        subset.add(img)
                    orbit.add(img)
                    frontier.append(img)
        orbit = sorted(orbit)
        seen |= set(orbit)
        classes.append(orbit)
    return classes


def sylow_subgroup(G: IndexedGroup, p: int) -> list[int]:
    """One Sylow p-subgroup, grown through normalizers."""
    target = G.order
    a = 0
    while target % p == 0:
        target //= p
        a += 1
    want = G.order // target
    current = [0]
    while len(current) < want:
        cur_set = set(current)
        grown = False
        # Prefer normalizer elements of p-power order: the normalizer
        # quotient contains one whenever current is not Sylow.
        norm = [
            g
            for g in range(G.order)
            if all(G.conj(g, x) in cur_set for x in current)
        ]
        for g in norm:
            if g in cur_set:
                continue
            k = G.element_order(g)
            while k % p == 0:
                k //= p
            if k != 1:
                # use the p-part of g instead
                g = _power(G, g, k)
                if g in cur_set:
                    continue
            ext = G.closure(current + [g])
            if len(ext) % p == 0 or len(ext) == 1:
                if want % len(ext) == 0:
                    current = ext
                    grown = True
                    break
        if not grown:
            raise RuntimeError("failed to grow a Sylow subgroup")
    return sorted(current)


def _power(G: IndexedGroup, g: int, k: int) -> int:
    out = 0
    base = g
    while k:
        if k & 1:
            out = G.mul(out, base)
        base = G.mul(base, base)
        k >>= 1
    return out


def all_sylows(G: IndexedGroup, p: int) -> list[tuple[int, ...]]:
    one = tuple(sylow_subgroup(G, p))
    orbit = {one}
    frontier = [one]
    while frontier:
        cur = frontier.pop()
        for g in range(G.order):
            img = G.conjugate_set(g, cur)
            if img not in orbit:
                orbit.add(img)
                frontier.append(img)
    return sorted(orbit)


def o_p(G: IndexedGroup, p: int) -> list[int]:
    """Largest normal p-subgroup = intersection of all Sylow p-subgroups."""
    sylows = all_sylows(G, p)
    core = set(sylows[0])
    for s in sylows[1:]:
        core &= set(s)
    return sorted(core)


def abelianization(G: IndexedGroup) -> list[int]:
    """Invariant factors of G/[G,G] (elementary divisors, ascending)."""
    comms = set()
    n = G.order
    for a in range(n):
        for b in range(n):
            c = G.mul(G.mul(a, b), G.inv(G.mul(b, a)))
            comms.add(c)
    derived = G.closure(list(comms))
    # quotient group by coset partition
    cosets = _coset_partition(G, derived)
    Q = _quotient_group(G, derived, cosets)
    return _abelian_invariants(Q)


def _coset_partition(G: IndexedGroup, H: list[int]) -> dict[int, int]:
    rep_of = {}
    reps = []
    for g in range(G.order):
        if g in rep_of:
            continue
        coset = sorted(G.mul(g, h) for h in H)
        r = coset[0]
        reps.append(r)
        for x in coset:
            rep_of[x] = r
    return rep_of


def quotient_group(G: IndexedGroup, H: list[int], name: str = "Q") -> IndexedGroup:
    """G/H for H normal; labels are coset representative indices."""
    hset = set(H)
    for g in range(G.order):
        for h in H:
            if G.conj(g, h) not in hset:
                raise ValueError("subgroup is not normal")
    rep_of = _coset_partition(G, H)
    return _quotient_group(G, H, rep_of, name=name)


def _quotient_group(G, H, rep_of, name: str = "Q") -> IndexedGroup:
    reps = sorted(set(rep_of.values()))
    reps.remove(rep_of[0])
    reps.insert(0, rep_of[0])
    pos = {r: i for i, r in enumerate(reps)}
    n = len(reps)
    table = np.empty((n, n), dtype=np.int32)
    for i, a in enumerate(reps):
        for j, b in enumerate(reps):
            table[i, j] = pos[rep_of[G.mul(a, b)]]
    return IndexedGroup(table, name=name, labels=reps)


def _abelian_invariants(Q: IndexedGroup) -> list[int]:
    if Q.order == 1:
        return []
    # finite abelian group: peel off maximal-order cyclic factors
    invs = []
    remaining = Q
    while remaining.order > 1:
        best = max(range(remaining.order), key=remaining.element_order)
        d = remaining.element_order(best)
        invs.append(d)
        cyc = remaining.closure([best])
        remaining = quotient_group(remaining, cyc)
    invs.sort()
    return invs


def _lcm(a: int, b: int) -> int:
    from math import gcd

    return a * b // gcd(a, b)


# -- signatures for reports --------------------------------------------

_CATALOG = {
    (1, (), 1, 0): "1",
    (2, (2,), 2, 1): "C2",
    (4, (2, 2), 2, 3): "C2xC2",
    (4, (4,), 4, 1): "C4",
    (6, (2,), 6, 3): "S3",
    (8, (2, 2), 4, 5): "D8",
    (8, (2, 2), 4, 1): "Q8",
    (24, (2,), 12, 9): "S4",
}


def signature(G: IndexedGroup) -> dict:
    """Order/abelianization/exponent signature, with a name when catalogued.

    The catalog avoids unsound isomorphism claims: anything unrecognized
    is reported by signature only.
    """
    invol = sum(1 for a in range(G.order) if a != 0 and G.mul(a, a) == 0)
    ab = tuple(abelianization(G))
    key = (G.order, ab, G.exponent(), invol)
    return {
        "order": G.order,
        "abelianization": list(ab),
        "exponent": key[2],
        "involutions": invol,
        "name": _CATALOG.get(key),
    }


class IndexedCarrier:
    """Adapter exposing an IndexedGroup through the ambient-group protocol
    used by Subgroup/fusion machinery (elements are plain indices)."""

    def __init__(self, G: IndexedGroup):
        self.group = G
        self.name = G.name
        self._cache: dict = {}

    def mul(self, a: int, b: int) -> int:
        return self.group.mul(a, b)

    def inv(self, a: int) -> int:
        return self.group.inv(a)

    def conj(self, g: int, x: int) -> int:
        return self.group.conj(g, x)

    def identity(self) -> int:
        return 0

    def elements(self) -> list[int]:
        return list(range(self.group.order))

    def in_truncation(self, x: int) -> bool:
        return 0 <= x < self.group.order

    def key(self, x: int) -> int:
        return x

    def element_order(self, x: int) -> int:
        return self.group.element_order(x)

    def index(self) -> dict:
        return {i: i for i in range(self.group.order)}

    def dense_table(self) -> np.ndarray:
        return np.asarray(self.group.table, dtype=np.int32)

    def inv_array(self) -> np.ndarray:
        return np.array([self.group.inv(i) for i in range(self.group.order)], dtype=np.int32)

    def conj_array(self) -> np.ndarray:
        if not hasattr(self, "_conj_array"):
            table = self.dense_table()
            inv = self.inv_array()
            n = table.shape[0]
            self._conj_array = table[table, inv[np.arange(n)][:, None]].astype(np.int32)
        return self._conj_array


# -- corpus constructors ------------------------------------------------


def _perm_mul(a: tuple, b: tuple) -> tuple:
    return tuple(a[b[i]] for i in range(len(a)))


def perm_group(gens: list[tuple], name: str = "G") -> IndexedGroup:
    els = {tuple(range(len(gens[0])))}
    frontier = list(els)
    while frontier:
        g = frontier.pop()
        for h in gens:
            for p in (_perm_mul(g, h), _perm_mul(h, g)):
                if p not in els:
                    els.add(p)
                    frontier.append(p)
    return group_from_mul(sorted(els), _perm_mul, name=name)


def symmetric_group(n: int) -> IndexedGroup:
    gens = [tuple([1, 0] + list(range(2, n))), tuple(list(range(1, n)) + [0])]
    return perm_group(gens, name=f"S{n}")


def alternating_group(n: int) -> IndexedGroup:
    three = tuple([1, 2, 0] + list(range(3, n)))
    if n <= 3:
        return perm_group([three[:n]], name=f"A{n}")
    cyc = (
        tuple(list(range(1, n)) + [0])
        if n % 2
        else tuple([0] + list(range(2, n)) + [1])
    )
    return perm_group([three, cyc], name=f"A{n}")


def dihedral_group(order: int) -> IndexedGroup:
    m = order // 2
    rot = tuple((i + 1) % m for i in range(m))
    ref = tuple((-i) % m for i in range(m))
    return perm_group([rot, ref], name=f"D{order}")


def cyclic_group(n: int) -> IndexedGroup:
    rot = tuple((i + 1) % n for i in range(n))
    return perm_group([rot], name=f"C{n}")


def direct_product(G: IndexedGroup, H: IndexedGroup, name: str | None = None) -> IndexedGroup:
    els = [(a, b) for a in range(G.order) for b in range(H.order)]

    def mul(x, y):
        return (G.mul(x[0], y[0]), H.mul(x[1], y[1]))

    return group_from_mul(els, mul, name=name or f"{G.name}x{H.name}")


def s3_x_c2() -> IndexedGroup:
    return direct_product(symmetric_group(3), cyclic_group(2), name="S3xC2")


def psl2(q: int) -> IndexedGroup:
    """PSL(2, q) as matrices over F_q modulo scalars (small prime q only)."""
    from plocal.arith import is_prime

    if not is_prime(q):
        raise ValueError("psl2 supports prime q only (PSL2(9) is alternating_group(6))")
    els = set()
    for a in range(q):
        for b in range(q):
            for c in range(q):
                for d in range(q):
                    if (a * d - b * c) % q == 1:
                        els.add(_proj_normalize((a, b, c, d), q))
    els = sorted(els)

    def mul(x, y):
        a, b, c, d = x
        e, f, g, h = y
        return _proj_normalize(
            ((a * e + b * g) % q, (a * f + b * h) % q, (c * e + d * g) % q, (c * f + d * h) % q),
            q,
        )

    return group_from_mul(els, mul, name=f"PSL2({q})")


def _proj_normalize(m: tuple, q: int) -> tuple:
    neg = tuple((q - v) % q for v in m)
    return min(m, neg)

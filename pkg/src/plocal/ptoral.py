"""Split discrete p-toral groups T ⋊ π at a finite truncation level.

Torus coordinates are residues a/p^k mod 1 held in canonical form
(0 <= a < p^k, p does not divide a unless a = 0), so raising the
truncation level never relabels elements: S[N] sits inside S[N+1]
literally.  All ops are exact integer arithmetic.

Elements are plain tuples ``(coords, w)`` with ``coords`` a tuple of
``(a, k)`` pairs and ``w`` the index of the π-part.  Everything here is
immutable; functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from plocal.arith import is_prime, padic_valuation

Coord = tuple[int, int]
Element = tuple[tuple[Coord, ...], int]

DEFAULT_TRUNCATION = 8
DEFAULT_CAP = 1 << 16


class CapExceeded(RuntimeError):
    """A closure or enumeration outgrew its cap; raise the cap or coarsen."""


class TruncationTooCoarse(RuntimeError):
    """The requested computation needs a deeper truncation level."""


def canon_coord(a: int, k: int, p: int) -> Coord:
    """Canonical form of the residue a/p^k mod 1."""
    if k < 0:
        raise ValueError("negative exponent")
    m = p**k
    a %= m
    while k > 0 and a % p == 0:
        if a == 0:
            return (0, 0)
        a //= p
        k -= 1
        m //= p
    if a == 0:
        return (0, 0)
    return (a, k)


def coord_add(c1: Coord, c2: Coord, p: int) -> Coord:
    a1, k1 = c1
    a2, k2 = c2
    k = max(k1, k2)
    return canon_coord(a1 * p ** (k - k1) + a2 * p ** (k - k2), k, p)


def coord_neg(c: Coord, p: int) -> Coord:
    a, k = c
    return canon_coord(-a, k, p)


def coord_scale(c: Coord, m: int, p: int) -> Coord:
    a, k = c
    return canon_coord(a * m, k, p)


def sort_key(x: Element):
    coords, w = x
    return tuple((k, a) for (a, k) in coords) + (w,)


@dataclass(frozen=True)
class AmbientGroup:
    """Split extension T ⋊ π with T = (Z/p^N)^r at truncation level N.

    π is given by a row-major multiplication table over indices
    {0..|π|-1} with identity index 0; the action assigns each π-index an
    r×r integer matrix acting on torus coordinates.
    """

    p: int
    rank: int
    truncation: int
    pi_table: tuple[tuple[int, ...], ...]
    action: tuple[tuple[tuple[int, ...], ...], ...]
    name: str = "S"
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"p = {self.p} is not prime")
        n = len(self.pi_table)
        if n == 0 or any(len(row) != n for row in self.pi_table):
            raise ValueError("pi table must be square and nonempty")
        k = n
        while k > 1:
            if k % self.p:
                raise ValueError("|pi| must be a power of p")
            k //= self.p
        if len(self.action) != n:
            raise ValueError("one action matrix per pi element required")
        for mat in self.action:
            if len(mat) != self.rank or any(len(r) != self.rank for r in mat):
                raise ValueError("action matrices must be rank x rank")
        if any(self.pi_table[0][j] != j or self.pi_table[j][0] != j for j in range(n)):
            raise ValueError("pi identity must be index 0")
        # invertibility mod p of every action matrix
        for w, mat in enumerate(self.action):
            if _det_mod(mat, self.p) == 0:
                raise ValueError(f"action matrix of pi[{w}] is singular mod p")

    # -- basic structure ------------------------------------------------

    @property
    def pi_order(self) -> int:
        return len(self.pi_table)

    def order(self) -> int:
        return (self.p ** (self.rank * self.truncation)) * self.pi_order

    def identity(self) -> Element:
        return (((0, 0),) * self.rank, 0)

    def pi_inverse(self, w: int) -> int:
        inv = self._cache.get("pi_inv")
        if inv is None:
            n = self.pi_order
            inv = [0] * n
            for i in range(n):
                for j in range(n):
                    if self.pi_table[i][j] == 0:
                        inv[i] = j
                        break
            self._cache["pi_inv"] = inv
        return inv[w]

    def act(self, w: int, coords: tuple[Coord, ...]) -> tuple[Coord, ...]:
        """Apply the action matrix of π-index w to torus coordinates."""
        mat = self.action[w]
        kmax = max((k for (_, k) in coords), default=0)
        if kmax == 0:
            return coords
        m = self.p**kmax
        nums = [a * self.p ** (kmax - k) for (a, k) in coords]
        out = []
        for i in range(self.rank):
            s = 0
            for j in range(self.rank):
                s += mat[i][j] * nums[j]
            out.append(canon_coord(s, kmax, self.p))
        return tuple(out)

    def mul(self, x: Element, y: Element) -> Element:
        t1, w1 = x
        t2, w2 = y
        moved = self.act(w1, t2)
        coords = tuple(coord_add(t1[i], moved[i], self.p) for i in range(self.rank))
        return (coords, self.pi_table[w1][w2])

    def inv(self, x: Element) -> Element:
        t, w = x
        wi = self.pi_inverse(w)
        moved = self.act(wi, t)
        coords = tuple(coord_neg(c, self.p) for c in moved)
        return (coords, wi)

    def conj(self, g: Element, x: Element) -> Element:
        return self.mul(self.mul(g, x), self.inv(g))

    def element_order(self, x: Element) -> int:
        n = 1
        y = x
        e = self.identity()
        while y != e:
            y = self.mul(y, x)
            n += 1
        return n

    # -- truncation-level element sets ----------------------------------

    def torus_elements(self, level: int | None = None) -> list[Element]:
        level = self.truncation if level is None else level
        m = self.p**level
        coords_range = [canon_coord(a, level, self.p) for a in range(m)]
        out = [
            (c, 0) for c in product(coords_range, repeat=self.rank)
        ]
        out.sort(key=sort_key)
        return out

    def elements(self) -> list[Element]:
        cached = self._cache.get("elements")
        if cached is None:
            if self.order() > DEFAULT_CAP:
                raise CapExceeded(
                    f"truncation holds {self.order()} elements (cap {DEFAULT_CAP})"
                )
            torus = self.torus_elements()
            cached = [
                (t[0], w) for t in torus for w in range(self.pi_order)
            ]
            cached.sort(key=sort_key)
            self._cache["elements"] = cached
        return cached

    def index(self) -> dict[Element, int]:
        idx = self._cache.get("index")
        if idx is None:
            idx = {x: i for i, x in enumerate(self.elements())}
            self._cache["index"] = idx
        return idx

    def dense_table(self) -> np.ndarray:
        """Dense multiplication table over element indices (built once)."""
        table = self._cache.get("table")
        if table is None:
            els = self.elements()
            idx = self.index()
            n = len(els)
            table = np.empty((n, n), dtype=np.int32)
            for i in range(n):
                for j in range(n):
                    table[i, j] = idx[self.mul(els[i], els[j])]
            self._cache["table"] = table
        return table

    def inv_array(self) -> np.ndarray:
        arr = self._cache.get("inv_array")
        if arr is None:
            table = self.dense_table()
            n = table.shape[0]
            arr = np.empty(n, dtype=np.int32)
            rows, cols = np.nonzero(table == 0)
            arr[rows] = cols
            self._cache["inv_array"] = arr
        return arr

    def conj_array(self) -> np.ndarray:
        """C[g, x] = index of g x g^{-1} (built once, vectorized)."""
        arr = self._cache.get("conj_array")
        if arr is None:
            table = self.dense_table()
            inv = self.inv_array()
            n = table.shape[0]
            gx = table  # gx[g, x] = g*x
            arr = table[gx, inv[np.arange(n)][:, None]]
            self._cache["conj_array"] = arr.astype(np.int32)
        return arr

    def in_truncation(self, x: Element) -> bool:
        coords, w = x
        return all(k <= self.truncation for (_, k) in coords) and 0 <= w < self.pi_order

    def key(self, x: Element):
        return sort_key(x)

    def raise_truncation(self, level: int) -> "AmbientGroup":
        """Same group at a deeper truncation; elements embed literally."""
        if level < self.truncation:
            raise ValueError("can only raise the truncation")
        return AmbientGroup(
            self.p, self.rank, level, self.pi_table, self.action, self.name
        )


def _det_mod(mat, p: int) -> int:
    n = len(mat)
    m = [[v % p for v in row] for row in mat]
    det = 1
    for c in range(n):
        piv = None
        for r in range(c, n):
            if m[r][c] % p:
                piv = r
                break
        if piv is None:
            return 0
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det = (det * m[c][c]) % p
        inv = pow(m[c][c], -1, p)
        for r in range(c + 1, n):
            f = (m[r][c] * inv) % p
            if f:
                for j in range(c, n):
                    m[r][j] = (m[r][j] - f * m[c][j]) % p
    return det % p


# -- subgroups ----------------------------------------------------------


@dataclass(frozen=True)
class Subgroup:
    """Extensional subgroup of an ambient truncation.

    ``meta`` optionally carries a certified stable torus rank from
    bullet/stabilization analysis.
    """

    ambient: AmbientGroup
    elements: tuple[Element, ...]
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_set", frozenset(self.elements))

    def __contains__(self, x: Element) -> bool:
        return x in self._set

    def __len__(self) -> int:
        return len(self.elements)

    def __le__(self, other: "Subgroup") -> bool:
        return self._set <= other._set

    def __lt__(self, other: "Subgroup") -> bool:
        return self._set < other._set

    def __hash__(self):
        return hash((id(self.ambient), self.elements))

    def __eq__(self, other):
        return (
            isinstance(other, Subgroup)
            and self.ambient is other.ambient
            and self.elements == other.elements
        )

    def key(self):
        k = self.__dict__.get("_key")
        if k is None:
            k = tuple(self.ambient.key(x) for x in self.elements)
            self.__dict__["_key"] = k
        return k

    def as_set(self) -> frozenset:
        return self._set

    def torus_part(self) -> "Subgroup":
        return make_subgroup(
            self.ambient, [x for x in self.elements if x[1] == 0], closed=True
        )

    def is_abelian(self) -> bool:
        els = self.elements
        amb = self.ambient
        for i, a in enumerate(els):
            for b in els[i + 1 :]:
                if amb.mul(a, b) != amb.mul(b, a):
                    return False
        return True


def make_subgroup(
    ambient: AmbientGroup, elements, closed: bool = False, meta: dict | None = None
) -> Subgroup:
    interning = None
    if meta is None and hasattr(ambient, "_cache"):
        interning = ambient._cache.setdefault("subgroup_interning", {})
        key = frozenset(elements)
        hit = interning.get(key)
        if hit is not None:
            return hit
    els = sorted(set(elements), key=ambient.key)
    sub = Subgroup(ambient, tuple(els), meta or {})
    if not closed:
        _check_closed(sub)
    if interning is not None:
        interning[frozenset(els)] = sub
    return sub


def _check_closed(sub: Subgroup):
    amb = sub.ambient
    e = amb.identity()
    if e not in sub:
        raise ValueError("subgroup must contain the identity")
    index = getattr(amb, "index", None)
    if index is not None and "table" in getattr(amb, "_cache", {}):
        idx = amb.index()
        table = amb.dense_table()
        si = np.fromiter((idx[x] for x in sub.elements), dtype=np.int32)
        member = np.zeros(table.shape[0], dtype=bool)
        member[si] = True
        if not member[table[np.ix_(si, si)]].all():
            raise ValueError("subgroup not closed under product")
        return
    for a in sub.elements:
        if amb.inv(a) not in sub:
            raise ValueError("subgroup not closed under inverse")
        for b in sub.elements:
            if amb.mul(a, b) not in sub:
                raise ValueError("subgroup not closed under product")


def generate(
    ambient: AmbientGroup, gens, cap: int = DEFAULT_CAP, meta: dict | None = None
) -> Subgroup:
    """Closure of gens under products and inverses, deterministic order."""
    gens = list(gens)
    for g in gens:
        if not ambient.in_truncation(g):
            raise ValueError(f"generator {g} outside truncation")
    if hasattr(ambient, "_cache") and (
        "table" in ambient._cache or ambient.order() <= DEFAULT_CAP
    ):
        # index closure over the dense table (compiled when available)
        from plocal.groups import table_closure

        idx = ambient.index()
        els_all = ambient.elements()
        table = ambient.dense_table()
        members = table_closure(table, [idx[g] for g in gens])
        if len(members) > cap:
            raise CapExceeded(
                f"closure exceeded cap {cap}; raise cap or truncation too coarse"
            )
        return make_subgroup(
            ambient, [els_all[i] for i in members], closed=True, meta=meta
        )
    els = {ambient.identity()}
    frontier = []
    for g in gens:
        if g not in els:
            els.add(g)
            frontier.append(g)
        gi = ambient.inv(g)
        if gi not in els:
            els.add(gi)
            frontier.append(gi)
    while frontier:
        g = frontier.pop()
        for h in list(els):
            for prod_ in (ambient.mul(g, h), ambient.mul(h, g)):
                if prod_ not in els:
                    if len(els) >= cap:
                        raise CapExceeded(
                            f"closure exceeded cap {cap}; raise cap or truncation too coarse"
                        )
                    els.add(prod_)
                    frontier.append(prod_)
    return make_subgroup(ambient, els, closed=True, meta=meta)


def full_group(ambient: AmbientGroup) -> Subgroup:
    return make_subgroup(ambient, ambient.elements(), closed=True)


def trivial_subgroup(ambient: AmbientGroup) -> Subgroup:
    return make_subgroup(ambient, [ambient.identity()], closed=True)


def _require_same_ambient(*subs: Subgroup):
    amb = subs[0].ambient
    for s in subs[1:]:
        if s.ambient is not amb:
            raise ValueError("ambient group mismatch")
    return amb


def _pool_indices(amb, within: Subgroup | None) -> np.ndarray:
    idx = amb.index()
    if within is None:
        return np.arange(len(idx), dtype=np.int32)
    return np.fromiter((idx[x] for x in within.elements), dtype=np.int32)


def _sub_indices(amb, sub: Subgroup) -> np.ndarray:
    idx = amb.index()
    return np.fromiter((idx[x] for x in sub.elements), dtype=np.int32)


def centralizer(sub: Subgroup, within: Subgroup | None = None) -> Subgroup:
    amb = sub.ambient
    table = amb.dense_table()
    pool = _pool_indices(amb, within)
    pi = _sub_indices(amb, sub)
    left = table[np.ix_(pool, pi)]
    right = table[np.ix_(pi, pool)].T
    mask = (left == right).all(axis=1)
    els = amb.elements()
    return make_subgroup(amb, [els[i] for i in pool[mask]], closed=True)


def normalizer(sub: Subgroup, within: Subgroup | None = None) -> Subgroup:
    amb = sub.ambient
    conj = amb.conj_array()
    pool = _pool_indices(amb, within)
    pi = _sub_indices(amb, sub)
    member = np.zeros(conj.shape[0], dtype=bool)
    member[pi] = True
    mask = member[conj[np.ix_(pool, pi)]].all(axis=1)
    els = amb.elements()
    return make_subgroup(amb, [els[i] for i in pool[mask]], closed=True)


def transporter_set(
    src: Subgroup, dst: Subgroup, within: Subgroup | None = None
) -> list[Element]:
    """N_S(P, Q) = elements conjugating src into dst."""
    amb = _require_same_ambient(src, dst)
    conj = amb.conj_array()
    pool = _pool_indices(amb, within)
    pi = _sub_indices(amb, src)
    member = np.zeros(conj.shape[0], dtype=bool)
    member[_sub_indices(amb, dst)] = True
    mask = member[conj[np.ix_(pool, pi)]].all(axis=1)
    els = amb.elements()
    return [els[i] for i in pool[mask]]


def center(sub: Subgroup) -> Subgroup:
    return centralizer(sub, within=sub)


def torus_fixed_kernel(
    ambient: AmbientGroup, c: int, allow_identity: bool = False
) -> Subgroup:
    """{t in T : c·t = t} = kernel of multiplication by c - 1 on the torus.

    Exact as long as v_p(c-1) is below the truncation level.
    """
    if c == 1:
        if not allow_identity:
            raise ValueError("degree-1 operation is the identity")
        return make_subgroup(
            ambient, [(t, 0) for t in _torus_level(ambient, ambient.truncation)],
            closed=True,
        )
    v = padic_valuation(c - 1, ambient.p)
    if v >= ambient.truncation:
        raise TruncationTooCoarse(
            f"v_p(c-1) = {v} >= truncation {ambient.truncation}"
        )
    return make_subgroup(
        ambient, [(t, 0) for t in _torus_level(ambient, v)], closed=True
    )


def _torus_level(ambient: AmbientGroup, level: int):
    m = ambient.p**level
    coords = [canon_coord(a, level, ambient.p) for a in range(m)]
    return [c for c in product(coords, repeat=ambient.rank)]


# -- stabilization certificates ---------------------------------------


@dataclass(frozen=True)
class Stabilized:
    """Result of running a truncation-parametrized query at two levels."""

    value: object
    certificate: str  # "stable" | "unstable"
    levels: tuple[int, int]


def stabilize(query, ambient: AmbientGroup, compare=None) -> Stabilized:
    """Run ``query(ambient_at_level)`` at N and N+1; certify agreement.

    The canonical embedding S[N] -> S[N+1] is the identity on element
    literals, so results that are element collections compare literally.
    ``compare`` may override the comparison.
    """
    lo = ambient
    hi = ambient.raise_truncation(ambient.truncation + 1)
    r1 = query(lo)
    r2 = query(hi)
    if compare is not None:
        same = compare(r1, r2)
    else:
        same = _default_compare(r1, r2)
    return Stabilized(r1, "stable" if same else "unstable", (lo.truncation, hi.truncation))


def _default_compare(r1, r2) -> bool:
    if isinstance(r1, Subgroup) and isinstance(r2, Subgroup):
        return r1.elements == r2.elements
    if isinstance(r1, (list, set, frozenset)) and isinstance(r2, (list, set, frozenset)):
        return set(r1) == set(r2)
    return r1 == r2

"""Built-in example constructions: the dihedral 2-compact-group data,
the trivial torus, and the finite-ambient corpus specimens."""

from __future__ import annotations

from plocal.amalgam import AmalgamTransporter, ClassData, TelescopicView, telescopic_extend
from plocal.bullet import RetractionPair, bullet_data
from plocal.fusion import FusionMorphism, FusionSystem
from plocal.groups import symmetric_group
from plocal.ptoral import AmbientGroup, Subgroup, full_group, generate, make_subgroup


def dihedral_ambient(truncation: int = 8) -> AmbientGroup:
    """D at truncation N: torus Z/2^N with the inversion action of C2."""
    return AmbientGroup(
        2, 1, truncation, ((0, 1), (1, 0)), (((1,),), ((-1,),)), name="D"
    )


def dihedral_v(amb: AmbientGroup) -> Subgroup:
    t1 = (((1, 1),), 0)
    x = (((0, 0),), 1)
    return generate(amb, [t1, x])


def so3_fusion(amb: AmbientGroup) -> FusionSystem:
    """Fusion generated by the full symmetric action on the base Klein
    subgroup (rotation group data at the prime 2)."""
    t1 = (((1, 1),), 0)
    x = (((0, 0),), 1)
    t1x = amb.mul(t1, x)
    V = generate(amb, [t1, x])
    S = full_group(amb)
    cycle = {t1: x, x: t1x, t1x: t1, amb.identity(): amb.identity()}
    f3 = FusionMorphism(V, S, tuple(cycle[v] for v in V.elements))
    return FusionSystem(S, [f3], p=2, name="F_SO3")


def so3_klein_aut_data(F: FusionSystem) -> ClassData:
    """Aut_L(V) = the symmetric group on four letters, with ε embedding the
    normalizer as a Sylow and ρ the action on the inner Klein subgroup."""
    amb = F.ambient
    t1 = (((1, 1),), 0)
    x = (((0, 0),), 1)
    t2 = (((1, 2),), 0)
    V = generate(amb, [t1, x])
    A = symmetric_group(4)
    perm_idx = {lab: i for i, lab in enumerate(A.labels)}
    klein = {
        amb.identity(): (0, 1, 2, 3),
        t1: (2, 3, 0, 1),       # (13)(24)
        x: (1, 0, 3, 2),        # (12)(34)
        amb.mul(t1, x): (3, 2, 1, 0),  # (14)(23)
    }
    gen_eps = {t2: (1, 2, 3, 0), x: (1, 0, 3, 2)}  # t2 -> (1234)
    # extend eps multiplicatively over N_S(V)
    eps_idx = {amb.identity(): 0}
    frontier = [amb.identity()]
    N = generate(amb, [t2, x])
    while frontier:
        g = frontier.pop(0)
        for s, perm in gen_eps.items():
            h = amb.mul(s, g)
            if h in N.as_set() and h not in eps_idx:
                eps_idx[h] = A.mul(perm_idx[perm], eps_idx[g])
                frontier.append(h)
    klein_back = {perm_idx[p]: v for v, p in klein.items()}
    rho_maps = []
    for i in range(A.order):
        images = []
        for v in V.elements:
            conj = A.mul(A.mul(i, perm_idx[klein[v]]), A.inv(i))
            images.append(klein_back[conj])
        rho_maps.append(FusionMorphism(V, V, tuple(images)))
    return ClassData(V, A, eps_idx, rho_maps)


def so3_core(F: FusionSystem, pair: RetractionPair | None = None) -> AmalgamTransporter:
    pair = pair or bullet_data(F)
    return AmalgamTransporter(F, pair, hand_data=[so3_klein_aut_data(F)])


def so3_telescopic(truncation: int = 8):
    amb = dihedral_ambient(truncation)
    F = so3_fusion(amb)
    pair = bullet_data(F)
    core = so3_core(F, pair)
    return telescopic_extend(core)


def trivial_torus_ambient(truncation: int = 8, rank: int = 1) -> AmbientGroup:
    return AmbientGroup(
        2,
        rank,
        truncation,
        ((0,),),
        (tuple(tuple(int(i == j) for j in range(rank)) for i in range(rank)),),
        name="T",
    )


def trivial_torus_fusion(amb: AmbientGroup) -> FusionSystem:
    return FusionSystem(full_group(amb), [], p=amb.p, name="F_T")


def trivial_torus_telescopic(truncation: int = 6, rank: int = 1) -> TelescopicView:
    amb = trivial_torus_ambient(truncation, rank)
    F = trivial_torus_fusion(amb)
    pair = bullet_data(F)
    core = AmalgamTransporter(F, pair)
    return telescopic_extend(core)


def s4_d8_fusion(truncation: int = 2) -> FusionSystem:
    """The finite-ambient specimen: full Klein automorphisms over the
    order-8 dihedral group (conjugation fusion of the symmetric group on
    four letters)."""
    amb = dihedral_ambient(truncation)
    return so3_fusion(amb)


def d16_inner_fusion() -> FusionSystem:
    amb = dihedral_ambient(3)
    return FusionSystem(full_group(amb), [], p=2, name="F_D16")


def a4_v4_fusion() -> FusionSystem:
    """Rank-2 specimen: the alternating-group fusion on the Klein four."""
    amb = AmbientGroup(
        2, 2, 1, ((0,),), ((((1, 0), (0, 1)),)), name="V4"
    )
    S = full_group(amb)
    e1 = (((1, 1), (0, 0)), 0)
    e2 = (((0, 0), (1, 1)), 0)
    e12 = amb.mul(e1, e2)
    rot = {amb.identity(): amb.identity(), e1: e2, e2: e12, e12: e1}
    f = FusionMorphism(S, S, tuple(rot[v] for v in S.elements))
    return FusionSystem(S, [f], p=2, name="F_A4")


def z4_axiom1_breaker() -> FusionSystem:
    amb = AmbientGroup(2, 1, 2, ((0,),), (((1,),),), name="Z4")
    S = full_group(amb)
    inv = FusionMorphism(S, S, tuple(amb.inv(x) for x in S.elements))
    return FusionSystem(S, [inv], p=2, name="F_Z4neg")


def d8_axiom2_breaker() -> FusionSystem:
    amb = dihedral_ambient(2)
    S = full_group(amb)
    x = (((0, 0),), 1)
    t1 = (((1, 1),), 0)
    Px = generate(amb, [x])
    f = FusionMorphism(Px, S, (amb.identity(), t1))
    return FusionSystem(S, [f], p=2, name="F_D8neg")

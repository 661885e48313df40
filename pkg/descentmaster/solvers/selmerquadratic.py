from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from sympy.ntheory import isprime

from descentmaster.datastructures.models_and_schemas import Regime, SplittingType
from descentmaster.solvers.curvemodels import (
    CurveModel,
    DependencyException,
    F2Subspace,
    InconsistencyException,
    KummerTriple,
    UnsupportedCompletionException,
    UnsupportedConfigurationException,
)
from descentmaster.solvers.descent import (
    bad_primes,
    curve_discriminant_valuation,
    kummer_image,
    local_image,
    point_search,
    rank_lower_bound,
    selmer_Q,
    torsion_subgroup,
)
from descentmaster.solvers.gf2 import (
    gf2_annihilator,
    gf2_independent_rows,
    gf2_nullspace_basis,
    gf2_same_span,
    gf2_solve_rowspan,
    to_gf2,
)
from descentmaster.solvers.quadfield import (
    KSGroup,
    KSquareClass,
    PlaceOfK,
    QuadField,
    K_S_group,
    describe_place,
    embed,
    is_square_in_K,
    minimally_ramified_generator,
    places_over,
    real_places,
    splitting_type,
)
from descentmaster.solvers.squareclasses import Place, squarefree_part
from descentmaster.utils.configuration import settings


@dataclass(frozen=True)
class KKummerTriple:
    k1: KSquareClass
    k2: KSquareClass
    k3: KSquareClass

    def __post_init__(self) -> None:
        if not is_square_in_K(self.k1.rep * self.k2.rep * self.k3.rep):
            raise ValueError(f"{self} violates the kernel condition in K")

    @staticmethod
    def rational(triple: KummerTriple, K: QuadField) -> KKummerTriple:
        c1, c2, c3 = triple.as_tuple()
        return KKummerTriple(KSquareClass.of(K.element(c1)), KSquareClass.of(K.element(c2)), KSquareClass.of(K.element(c3)))

    def conj(self) -> KKummerTriple:
        return KKummerTriple(*(KSquareClass.of(k.rep.conj()) for k in (self.k1, self.k2, self.k3)))

    def __mul__(self, other: KKummerTriple) -> KKummerTriple:
        return KKummerTriple(self.k1 * other.k1, self.k2 * other.k2, self.k3 * other.k3)

    def reprJSON(self) -> List[Dict[str, int]]:
        return [self.k1.reprJSON(), self.k2.reprJSON(), self.k3.reprJSON()]

    def __str__(self) -> str:
        return f"({self.k1}, {self.k2}, {self.k3})"


@dataclass
class SelmerOverK:
    field: QuadField
    curve: CurveModel
    ks: KSGroup
    basis: List[KKummerTriple]
    matrix: np.ndarray  # rows: (alpha, beta) coordinates over ks.basis
    labels: List[str]
    s_primes: List[int]
    good_ramified: List[int] = field(default_factory=list)
    identifications: Dict[str, str] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def vector(self, triple: KKummerTriple) -> np.ndarray:
        return np.concatenate([self.ks.coordinates(triple.k1.rep), self.ks.coordinates(triple.k2.rep)])

    def contains(self, triple: KKummerTriple) -> bool:
        try:
            vec: np.ndarray = self.vector(triple)
        except ValueError:
            return False
        return gf2_solve_rowspan(self.matrix, vec) is not None

    def triple(self, vec: Sequence[int]) -> KKummerTriple:
        n: int = self.ks.dimension
        alpha = np.asarray(vec[:n], dtype=np.uint8)
        beta = np.asarray(vec[n : 2 * n], dtype=np.uint8)
        return KKummerTriple(self.ks.element(alpha), self.ks.element(beta), self.ks.element(alpha ^ beta))


def _has_unit_image(image: F2Subspace) -> bool:
    """at odd ell: the image consists of unit triples (valuation bits zero) and has full dimension"""
    return image.dimension == 2 and not image.matrix[:, 0::2].any()


def selmer_places(curve: CurveModel, K: QuadField) -> Tuple[List[int], List[int]]:
    """rational primes whose places enter S, and bad primes that become good over K (ramified twist)"""
    K.require_real()
    s_primes: List[int] = [2]
    good_ramified: List[int] = []
    diffs: List[int] = curve.root_differences()
    for ell in bad_primes(curve)[1:]:
        kind: SplittingType = splitting_type(K, ell)
        if kind == SplittingType.RAMIFIED and curve.d % ell == 0 and all(diff % ell for diff in diffs):
            # d = ell*u and m = ell*m': E_d is isomorphic over K to E_(dm/ell^2)
            twisted: CurveModel = curve.twist(int(squarefree_part(curve.d * K.m)))
            if curve_discriminant_valuation(twisted, ell) != 0:
                raise InconsistencyException(f"reduction of {twisted} at {ell}", "good", "bad")
            good_ramified.append(ell)
            continue
        if kind != SplittingType.SPLIT:
            raise UnsupportedCompletionException(f"{curve} is bad at {ell}, which is {kind.value} in {K}")
        if _has_unit_image(local_image(curve, Place(ell))):
            continue
        s_primes.append(ell)
    if splitting_type(K, 2) != SplittingType.SPLIT:
        raise UnsupportedCompletionException(f"2 is {splitting_type(K, 2).value} in {K}")
    return s_primes, good_ramified


def _local_constraint_rows_K(curve: CurveModel, ks: KSGroup, place: PlaceOfK) -> np.ndarray:
    n: int = ks.dimension
    rational: Place = place.rational_place
    k: int = rational.n_bits()
    columns: List[np.ndarray] = []
    gens_bits: List[Tuple[int, ...]] = [embed(g.rep, place).bits() for g in ks.basis]
    for slot in (0, 1):
        for bits in gens_bits:
            col = np.zeros(3 * k, dtype=np.uint8)
            col[slot * k : (slot + 1) * k] = bits
            col[2 * k : 3 * k] = bits
            columns.append(col)
    lmap: np.ndarray = np.stack(columns, axis=1)
    annihilator: np.ndarray = gf2_annihilator(local_image(curve, rational).matrix, 3 * k)
    if annihilator.shape[0] == 0:
        return np.zeros((0, 2 * n), dtype=np.uint8)
    return (annihilator.astype(np.int64) @ lmap.astype(np.int64) % 2).astype(np.uint8)


def selmer_K(curve: CurveModel, K: QuadField) -> SelmerOverK:
    """2-Selmer group of a rational curve over the real quadratic field K"""
    s_primes, good_ramified = selmer_places(curve, K)
    ks: KSGroup = K_S_group(K, s_primes)
    places: List[PlaceOfK] = real_places(K) + [pl for ell in s_primes for pl in places_over(K, ell)]
    n_cols: int = 2 * ks.dimension
    rows: np.ndarray = np.vstack([_local_constraint_rows_K(curve, ks, pl) for pl in places])
    kernel: np.ndarray = gf2_nullspace_basis(rows) if rows.shape[0] else np.eye(n_cols, dtype=np.uint8)

    torsion_vecs: List[np.ndarray] = []
    for pt in torsion_subgroup(curve).points:
        t: KKummerTriple = KKummerTriple.rational(kummer_image(curve, pt), K)
        torsion_vecs.append(np.concatenate([ks.coordinates(t.k1.rep), ks.coordinates(t.k2.rep)]))
    presented: np.ndarray = to_gf2([v.tolist() for v in torsion_vecs] + kernel.tolist(), n_cols=n_cols)
    chosen: List[int] = gf2_independent_rows(presented)
    if len(chosen) != kernel.shape[0]:
        raise InconsistencyException(f"rational torsion in the Selmer group of {curve} over {K}", kernel.shape[0], len(chosen))

    selmer: SelmerOverK = SelmerOverK(
        field=K,
        curve=curve,
        ks=ks,
        basis=[],
        matrix=presented[chosen],
        labels=["torsion" if i < len(torsion_vecs) else "extra" for i in chosen],
        s_primes=s_primes,
        good_ramified=good_ramified,
        identifications={str(pl): describe_place(K, pl) for pl in places},
    )
    selmer.basis = [selmer.triple(row) for row in selmer.matrix]
    logger.debug(f"{curve} over {K}: {s_primes=} dim={selmer.dimension} {selmer.labels}")
    return selmer


def is_conjugation_stable(selmer: SelmerOverK) -> bool:
    conj_rows: List[np.ndarray] = [selmer.vector(b.conj()) for b in selmer.basis]
    if not conj_rows:
        return True
    return gf2_same_span(to_gf2([r.tolist() for r in conj_rows]), selmer.matrix)


def norm_map(x: KKummerTriple, K: QuadField) -> KummerTriple:
    """componentwise relative norm K -> Q"""
    return KummerTriple.of(*(k.rep.norm() for k in (x.k1, x.k2, x.k3)))


# -------------------------------------------------------------------------------------------------
# regimes


def regime_of(p: int) -> Regime:
    if not isprime(p):
        raise ValueError(f"{p=} is not prime")
    if p % 15 not in (1, 2, 3, 4, 5, 8):
        return Regime.OUTSIDE
    if p % 8 != 1:
        return Regime.NOT_1_MOD_8
    if p % 120 in (1, 49):
        return Regime.P_1_49_MOD_120
    return Regime.P_17_113_MOD_120


def regime_setup(p: int, q: Optional[int] = None) -> Tuple[CurveModel, QuadField, CurveModel]:
    """(curve over K, K, rational twist whose Selmer group is tested) for the two regimes"""
    regime: Regime = regime_of(p)
    if regime == Regime.P_1_49_MOD_120:
        return CurveModel.x015(-1), QuadField(p), CurveModel.x015(-p)
    if regime == Regime.P_17_113_MOD_120:
        q = q or _auxiliary_q(p)
        if q == p or regime_of(q) != Regime.P_17_113_MOD_120:
            raise UnsupportedConfigurationException(f"{q=} is not a second prime = 17, 113 mod 120")
        return CurveModel.x015(-q), QuadField(p * q), CurveModel.x015(-p)
    raise UnsupportedConfigurationException(f"{p=} is in regime {regime.value}; no quadratic field applies")


def _auxiliary_q(p: int) -> int:
    for q in (settings.AUXILIARY_Q, 17, 113, 137, 233):
        if q != p:
            return q
    raise UnsupportedConfigurationException("no auxiliary prime available")


@dataclass
class CaseTable:
    p: int
    class_at_2: int  # im(x_-1) at the place over 2 where it is unramified: 1 or -3
    class_at_5: int  # im(x_-1) at the places over 5: 1 or 2
    dimension: int
    extra: List[KKummerTriple]
    place_2: str


def generator_case_table(p: int, selmer: Optional[SelmerOverK] = None) -> CaseTable:
    if regime_of(p) != Regime.P_1_49_MOD_120:
        raise UnsupportedConfigurationException(f"{p=} is not 1, 49 mod 120")
    K: QuadField = QuadField(p)
    x_m1: Optional[KSquareClass] = minimally_ramified_generator(K, -1)
    if x_m1 is None:
        raise InconsistencyException(f"norm -1 from {K}", "solvable", None)
    unram: List[PlaceOfK] = [
        pl for pl in places_over(K, 2) if embed(x_m1.rep, pl).val_parity == 0 and embed(x_m1.rep, pl).unit_part in (1, -3)
    ]
    if len(unram) != 1:
        raise InconsistencyException(f"places over 2 where {x_m1} is unramified", 1, len(unram))
    c2: int = embed(x_m1.rep, unram[0]).rep
    at5: List[int] = [embed(x_m1.rep, pl).rep for pl in places_over(K, 5)]
    if len(set(at5)) != 1 or at5[0] not in (1, 2):
        raise InconsistencyException(f"classes of {x_m1} over 5", "one unit class", at5)
    c5: int = at5[0]
    dimension: int = 4 if (c2 == 1) == (c5 == 1) else 2
    extra: List[KKummerTriple] = []
    one: KSquareClass = KSquareClass.of(K.element(1))
    if (c2, c5) == (1, 1):
        extra.append(KKummerTriple(x_m1, x_m1, one))
    elif (c2, c5) == (-3, 2):
        x3: KSquareClass = KSquareClass.of(x_m1.rep * 3)
        extra.append(KKummerTriple(x3, x3, one))
    if selmer is not None:
        for t in extra:
            if not selmer.contains(t):
                raise InconsistencyException(f"{t} in the Selmer group over {K}", True, False)
        if selmer.dimension != dimension:
            raise InconsistencyException(f"Selmer dimension over {K} from the case table", dimension, selmer.dimension)
    return CaseTable(p=p, class_at_2=c2, class_at_5=c5, dimension=dimension, extra=extra, place_2=str(unram[0]))


# -------------------------------------------------------------------------------------------------
# corestriction


@dataclass
class CorestrictionCertificate:
    ok: bool
    vacuous: bool
    targets: List[KummerTriple] = field(default_factory=list)
    preimages: List[KKummerTriple] = field(default_factory=list)
    failed: List[KummerTriple] = field(default_factory=list)

    def reprJSON(self) -> dict:
        return {
            "ok": self.ok,
            "vacuous": self.vacuous,
            "targets": [t.reprJSON() for t in self.targets],
            "preimages": [t.reprJSON() for t in self.preimages],
            "failed": [t.reprJSON() for t in self.failed],
        }


def corestriction_surjectivity_check(
    selmer_k: Optional[SelmerOverK], selmer_target: Optional[F2Subspace[KummerTriple]], target_curve: CurveModel
) -> CorestrictionCertificate:
    """each generator of the rational Selmer group beyond the torsion images is a norm from the Selmer group over K"""
    if selmer_k is None or selmer_target is None:
        raise DependencyException("both Selmer groups have to be computed first")
    K: QuadField = selmer_k.field
    torsion: List[KummerTriple] = [kummer_image(target_curve, pt) for pt in torsion_subgroup(target_curve).points]
    norms: List[KummerTriple] = [norm_map(b, K) for b in selmer_k.basis]
    targets: List[KummerTriple] = [b for b, lab in zip(selmer_target.basis, selmer_target.labels) if lab != "torsion"]
    if not targets:
        return CorestrictionCertificate(ok=True, vacuous=True)

    primes: List[int] = sorted({q for t in torsion + norms + targets for q in t.primes()})
    rows: np.ndarray = to_gf2([t.vector(primes) for t in norms + torsion], n_cols=2 * (len(primes) + 1))
    cert: CorestrictionCertificate = CorestrictionCertificate(ok=True, vacuous=False, targets=targets)
    for target in targets:
        coeffs = gf2_solve_rowspan(rows, target.vector(primes))
        if coeffs is None:
            cert.ok = False
            cert.failed.append(target)
            continue
        pre: KKummerTriple = KKummerTriple.rational(KummerTriple.trivial(), K)
        for c, b in zip(coeffs[: len(norms)], selmer_k.basis):
            if c:
                pre = pre * b
        cert.preimages.append(pre)
    logger.debug(f"corestriction over {K}: ok={cert.ok} targets={[str(t) for t in targets]}")
    return cert


def corestriction_for_prime(p: int, q: Optional[int] = None) -> Tuple[CorestrictionCertificate, SelmerOverK, F2Subspace]:
    curve_k, K, target_curve = regime_setup(p, q)
    selmer_k: SelmerOverK = selmer_K(curve_k, K)
    selmer_target: F2Subspace[KummerTriple] = selmer_Q(target_curve)
    return corestriction_surjectivity_check(selmer_k, selmer_target, target_curve), selmer_k, selmer_target


# -------------------------------------------------------------------------------------------------
# rank accounting


@dataclass
class RankTwistAccounting:
    d: int
    m: int
    lower_d: int
    lower_dm: int
    selmer_k_dimension: int

    @property
    def upper(self) -> int:
        return self.selmer_k_dimension - 2

    @property
    def consistent(self) -> bool:
        return self.lower_d + self.lower_dm <= self.upper

    @property
    def sha2_defect_bound(self) -> int:
        return self.upper - self.lower_d - self.lower_dm

    def reprJSON(self) -> dict:
        return {
            "d": self.d,
            "m": self.m,
            "rank_lb_d": self.lower_d,
            "rank_lb_dm": self.lower_dm,
            "selmer_k_dimension": self.selmer_k_dimension,
            "upper": self.upper,
            "consistent": self.consistent,
        }


def rank_twist_relation(
    d: int, m: int, effort: Optional[int] = None, selmer: Optional[SelmerOverK] = None
) -> RankTwistAccounting:
    """rank(E_d / Q(sqrt m)) = rank(E_d / Q) + rank(E_dm / Q), bounded by dim S^2(E_d / Q(sqrt m)) - 2"""
    curve_d: CurveModel = CurveModel.x015(d)
    curve_dm: CurveModel = CurveModel.x015(int(squarefree_part(d * m)))
    sk: SelmerOverK = selmer or selmer_K(curve_d, QuadField(m))
    acc: RankTwistAccounting = RankTwistAccounting(
        d=d,
        m=m,
        lower_d=rank_lower_bound(curve_d, point_search(curve_d, effort)),
        lower_dm=rank_lower_bound(curve_dm, point_search(curve_dm, effort)),
        selmer_k_dimension=sk.dimension,
    )
    if not acc.consistent:
        raise InconsistencyException(f"rank accounting of E_{d} over Q(sqrt {m})", f"<= {acc.upper}", acc.lower_d + acc.lower_dm)
    return acc


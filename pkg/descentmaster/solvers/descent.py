from __future__ import annotations

import itertools
from fractions import Fraction
from functools import reduce
from math import gcd, isqrt
from threading import RLock
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

import cachetools
import numpy as np
from loguru import logger
from ordered_set import OrderedSet
from ratelimit import RateLimitException, limits
from sympy import Poly, Symbol, primefactors
from sympy.ntheory import multiplicity

from descentmaster.datastructures.models_and_schemas import SplittingType
from descentmaster.solvers.curvemodels import (
    CurveModel,
    CurvePoint,
    F2Subspace,
    InconsistencyException,
    KummerTriple,
    LocalImageBudgetException,
    LocalKummerTriple,
    TorsionGroup,
    add_points,
    double_point,
)
from descentmaster.solvers.gf2 import gf2_annihilator, gf2_independent_rows, gf2_nullspace_basis, gf2_rank, to_gf2
from descentmaster.solvers.quadfield import QuadField, splitting_type
from descentmaster.solvers.squareclasses import (
    Place,
    Rational,
    legendre,
    local_square_class,
    prime_iter,
    squarefree_part,
)
from descentmaster.utils.configuration import settings
from descentmaster.utils.datapersistence import local_image_disk_cache


_image_cache: cachetools.LRUCache = cachetools.LRUCache(maxsize=4096)
_image_lock: RLock = RLock()


@limits(calls=20, period=1.0)
def _debuglog_limit(*args) -> None:  # type: ignore
    logger.debug(*args)


def debuglog_limit(*args) -> None:  # type: ignore
    try:
        _debuglog_limit(*args)
    except RateLimitException:
        pass


def kummer_image(curve: CurveModel, point: CurvePoint) -> KummerTriple:
    """(a, b) -> d(a - e_i); a 2-torsion point gets the product of the other two differences in its own slot"""
    if point.infinity:
        return KummerTriple.trivial()
    curve.check_point(point)
    roots = curve.roots
    if point.y == 0:
        i: int = roots.index(int(point.x))
        c: List[Rational] = [curve.d * (point.x - e) for e in roots]
        j, k = [idx for idx in range(3) if idx != i]
        c[i] = (roots[i] - roots[j]) * (roots[i] - roots[k])
        return KummerTriple.of(*c)
    return KummerTriple.of(*(curve.d * (point.x - e) for e in roots))


def local_kummer_image(curve: CurveModel, x: Rational, place: Place) -> Optional[LocalKummerTriple]:
    """image of the local point with abscissa x, None if d*f(x) is not a local square"""
    fx: Fraction = curve.f(x)
    if fx == 0:
        return None
    if not local_square_class(curve.d * fx, place).is_trivial():
        return None
    return LocalKummerTriple.of(place, *(curve.d * (Fraction(x) - e) for e in curve.roots))


def two_torsion_points(curve: CurveModel) -> List[CurvePoint]:
    return [CurvePoint.of(e, 0) for e in curve.roots]


# -------------------------------------------------------------------------------------------------
# torsion


def _reduction_count(curve: CurveModel, ell: int) -> int:
    """#E~(F_ell) of u*y^2 = f(x), u the ell-free part of d (good reduction over Q_ell(sqrt ell) if ell | d)"""
    u: int = curve.d // ell ** int(multiplicity(ell, abs(curve.d)))
    count: int = 1
    for x in range(ell):
        v: int = (u * (x - curve.e1) * (x - curve.e2) * (x - curve.e3)) % ell
        if v == 0:
            count += 1
        elif legendre(v, ell) == 1:
            count += 2
    return count


def torsion_bound(curve: CurveModel, n_primes: int = 4) -> int:
    diffs: int = 2
    for diff in curve.root_differences():
        diffs *= diff
    counts: List[int] = []
    for ell in prime_iter(10_000):
        if ell < 5 or diffs % ell == 0:
            continue
        counts.append(_reduction_count(curve, ell))
        if len(counts) == n_primes:
            break
    bound: int = reduce(gcd, counts)
    logger.debug(f"{curve} reduction counts {counts} -> torsion order divides {bound}")
    return bound


def _short_model(curve: CurveModel) -> Tuple[Tuple[int, int, int], int]:
    """roots d*e_i of Y^2 = (X - d e_1)(X - d e_2)(X - d e_3), X = d x, Y = d^2 y"""
    return (curve.d * curve.e1, curve.d * curve.e2, curve.d * curve.e3), curve.d


def _rational_sqrt(q: Fraction) -> Optional[Fraction]:
    if q < 0:
        return None
    n, m = isqrt(q.numerator), isqrt(q.denominator)
    if n * n == q.numerator and m * m == q.denominator:
        return Fraction(n, m)
    return None


def _point_from_short(curve: CurveModel, big_x: Fraction) -> List[CurvePoint]:
    x: Fraction = big_x / curve.d
    y2: Fraction = curve.f(x) / curve.d
    y: Optional[Fraction] = _rational_sqrt(y2)
    if y is None:
        return []
    return [CurvePoint(x, y)] if y == 0 else [CurvePoint(x, y), CurvePoint(x, -y)]


def halve_point(curve: CurveModel, point: CurvePoint) -> List[CurvePoint]:
    """all Q with 2Q = point (empty unless the Kummer image of point is trivial)"""
    if point.infinity:
        return two_torsion_points(curve) + [CurvePoint.at_infinity()]
    if not kummer_image(curve, point).is_trivial():
        return []
    roots, d = _short_model(curve)
    big_x: Fraction = d * point.x
    if point.y == 0:
        i: int = roots.index(int(big_x))
        r, others = roots[i], [roots[j] for j in range(3) if j != i]
        s: Optional[Fraction] = _rational_sqrt(Fraction((r - others[0]) * (r - others[1])))
        candidates: List[Fraction] = [] if s is None else [r + s, r - s]
    else:
        sq: List[Optional[Fraction]] = [_rational_sqrt(big_x - r) for r in roots]
        if any(s is None for s in sq):
            return []
        candidates = []
        for signs in itertools.product((1, -1), repeat=3):
            s1, s2, s3 = (sgn * s for sgn, s in zip(signs, sq))  # type: ignore
            candidates.append(big_x + s1 * s2 + s1 * s3 + s2 * s3)
    ret: List[CurvePoint] = []
    for cand in OrderedSet(candidates):
        for q in _point_from_short(curve, cand):
            if double_point(curve, q) == point and q not in ret:
                ret.append(q)
    return ret


def three_torsion_points(curve: CurveModel) -> List[CurvePoint]:
    """rational roots of the 3-division polynomial of the short model"""
    roots, _ = _short_model(curve)
    a2: int = -sum(roots)
    a4: int = roots[0] * roots[1] + roots[0] * roots[2] + roots[1] * roots[2]
    a6: int = -roots[0] * roots[1] * roots[2]
    X = Symbol("X")
    psi3 = Poly(3 * X**4 + 4 * a2 * X**3 + 6 * a4 * X**2 + 12 * a6 * X + 4 * a2 * a6 - a4**2, X)
    ret: List[CurvePoint] = []
    for root in psi3.ground_roots():
        ret += _point_from_short(curve, Fraction(int(root.p), int(root.q)))
    return [p for p in ret if p.y != 0]


def _close_under_addition(curve: CurveModel, points: Sequence[CurvePoint], limit: int = 16) -> List[CurvePoint]:
    group: List[CurvePoint] = [CurvePoint.at_infinity()]
    frontier: List[CurvePoint] = list(points)
    while frontier:
        pt = frontier.pop()
        if pt in group:
            continue
        group.append(pt)
        if len(group) > limit:
            raise InconsistencyException(f"torsion closure on {curve}", f"at most {limit} points", len(group))
        for q in list(group):
            s = add_points(curve, pt, q)
            if s not in group:
                frontier.append(s)
    return group


def _order(curve: CurveModel, point: CurvePoint, limit: int = 16) -> int:
    acc: CurvePoint = point
    for n in range(1, limit + 1):
        if acc.infinity:
            return n
        acc = add_points(curve, acc, point)
    raise ValueError(f"{point} has order > {limit}")


def torsion_subgroup(curve: CurveModel) -> TorsionGroup:
    """E(Q)_tors for full rational 2-torsion: Z/2n x Z/2 with 2n in {2, 4, 6, 8}"""
    bound: int = torsion_bound(curve)
    found: List[CurvePoint] = two_torsion_points(curve)
    if bound % 8 == 0:
        fours: List[CurvePoint] = [q for t in two_torsion_points(curve) for q in halve_point(curve, t)]
        found += fours
        if bound % 16 == 0:
            found += [q for p in fours for q in halve_point(curve, p)]
    if bound % 3 == 0:
        found += three_torsion_points(curve)

    points: List[CurvePoint] = sorted(
        _close_under_addition(curve, found), key=lambda p: (not p.infinity, _order(curve, p), p.x, p.y)
    )
    order: int = len(points)
    if bound % order:
        raise ValueError(f"torsion of order {order} does not divide the reduction bound {bound}")
    biggest: CurvePoint = max(points, key=lambda p: (_order(curve, p), -abs(p.x), p.y))
    generators: List[CurvePoint] = [biggest]
    span: List[CurvePoint] = _close_under_addition(curve, [biggest])
    for t in two_torsion_points(curve):
        if t not in span:
            generators.append(t)
            break
    structure: str = f"Z/{order // 2}xZ/2"
    logger.debug(f"{curve}: {structure} {generators=}")
    return TorsionGroup(structure=structure, order=order, points=points, generators=generators)


# -------------------------------------------------------------------------------------------------
# local images


def local_selmer_dim(curve: CurveModel, place: Place, degree: int = 1) -> int:
    """dim E(F)/2E(F) for full 2-torsion: 2 + [F:Q_2] over 2, 2 at odd primes, 1 over R, 0 over C"""
    two_torsion_dim: int = 2
    if place.is_real:
        return 0 if degree == 2 else two_torsion_dim - 1
    if place.prime == 2:
        return two_torsion_dim + degree
    return two_torsion_dim


def _local_class_rep(d: int, place: Place) -> int:
    return local_square_class(d, place).rep


def _candidate_abscissae(place: Place) -> Iterator[Fraction]:
    bound: int = settings.LOCAL_IMAGE_SEARCH_BOUND
    if place.is_real:
        for t in range(bound):
            for den in (1, 2, 4):
                yield Fraction(t, den)
                yield Fraction(-t, den)
        return
    ell: int = place.prime
    for t in range(bound):
        for j in range(settings.LOCAL_IMAGE_DENOMINATOR_EXPONENT + 1):
            yield Fraction(t, ell**j)
            yield Fraction(-t, ell**j)


def _enumerate_local_image(roots: Tuple[int, int, int], d_rep: int, place: Place) -> List[LocalKummerTriple]:
    curve: CurveModel = CurveModel(*roots, d=d_rep)
    target: int = local_selmer_dim(curve, place)
    basis: List[LocalKummerTriple] = []
    rows: List[List[int]] = []

    def offer(image: Optional[LocalKummerTriple]) -> None:
        if image is None:
            return
        trial: List[List[int]] = rows + [image.bits()]
        if gf2_rank(to_gf2(trial)) > len(rows):
            rows.append(image.bits())
            basis.append(image)

    for t in two_torsion_points(curve):
        img: KummerTriple = kummer_image(curve, t)
        offer(LocalKummerTriple.of(place, *img.as_tuple()))

    tried: int = 0
    for x in _candidate_abscissae(place):
        if len(basis) >= target:
            break
        tried += 1
        offer(local_kummer_image(curve, x, place))
        if tried % 5000 == 0:
            debuglog_limit(f"(LOOPINFO) local image {roots=} {d_rep=} {place=} {tried=} dim={len(basis)}")

    if len(basis) != target:
        raise LocalImageBudgetException(
            f"local image of {curve} at {place}: dimension {len(basis)} < {target} after {tried} abscissae"
        )
    return basis


def local_image(curve: CurveModel, place: Place) -> F2Subspace[LocalKummerTriple]:
    """image of the local Kummer map; depends on the curve only through the roots and the local class of d"""
    d_rep: int = _local_class_rep(curve.d, place)
    key: Tuple = (curve.roots, d_rep, place)
    with _image_lock:
        cached: Optional[List[LocalKummerTriple]] = _image_cache.get(key)
    if cached is None:
        disk_key: str = f"{curve.roots}|{d_rep}|{place}"
        reps: Optional[List[List[int]]] = local_image_disk_cache.get(disk_key)
        if reps is not None:
            cached = [LocalKummerTriple.of(place, *r) for r in reps]
        else:
            cached = _enumerate_local_image(curve.roots, d_rep, place)
            local_image_disk_cache.put(disk_key, [list(t.reps()) for t in cached])
        with _image_lock:
            _image_cache[key] = cached
    return F2Subspace(basis=list(cached), matrix=np.array([t.bits() for t in cached], dtype=np.uint8))


# -------------------------------------------------------------------------------------------------
# global descent


def _minimal_root_differences(curve: CurveModel, ell: int) -> List[int]:
    diffs: List[int] = [curve.d * diff for diff in curve.root_differences()]
    if ell == 2:
        return diffs
    while all(diff % (ell * ell) == 0 for diff in diffs):
        diffs = [diff // (ell * ell) for diff in diffs]
    return diffs


def curve_discriminant_valuation(curve: CurveModel, ell: int) -> int:
    """v_ell of 16 * prod (r_i - r_j)^2 of the short model after removing ell^2 scalings"""
    val: int = sum(2 * int(multiplicity(ell, abs(diff))) for diff in _minimal_root_differences(curve, ell))
    return val + (4 if ell == 2 else 0)


def bad_primes(curve: CurveModel) -> List[int]:
    """2 together with the odd primes of bad reduction"""
    candidates: Set[int] = {int(p) for diff in curve.root_differences() for p in primefactors(abs(curve.d * diff))}
    odd_bad: List[int] = sorted(ell for ell in candidates if ell != 2 and curve_discriminant_valuation(curve, ell) > 0)
    return [2] + odd_bad


def _local_constraint_rows(curve: CurveModel, place: Place, primes: Sequence[int]) -> np.ndarray:
    """rows r with r . v = 0 iff the triple with coordinate vector v lands in the local image at place"""
    basis: List[int] = [-1] + list(primes)
    n: int = len(basis)
    k: int = place.n_bits()
    columns: List[np.ndarray] = []
    for slot in (0, 1):
        for g in basis:
            bits: Tuple[int, ...] = local_square_class(g, place).bits()
            col = np.zeros(3 * k, dtype=np.uint8)
            col[slot * k : (slot + 1) * k] = bits
            col[2 * k : 3 * k] = bits
            columns.append(col)
    lmap: np.ndarray = np.stack(columns, axis=1)  # 3k x 2n
    image: F2Subspace[LocalKummerTriple] = local_image(curve, place)
    annihilator: np.ndarray = gf2_annihilator(image.matrix, 3 * k)
    if annihilator.shape[0] == 0:
        return np.zeros((0, 2 * n), dtype=np.uint8)
    return (annihilator.astype(np.int64) @ lmap.astype(np.int64) % 2).astype(np.uint8)


def selmer_Q(curve: CurveModel) -> F2Subspace[KummerTriple]:
    """2-Selmer group over Q: triples over <-1, S> satisfying every local condition in S and at infinity"""
    primes: List[int] = bad_primes(curve)
    places: List[Place] = [Place.real()] + [Place(p) for p in primes]
    n_cols: int = 2 * (len(primes) + 1)
    constraints: List[np.ndarray] = [_local_constraint_rows(curve, v, primes) for v in places]
    stacked: np.ndarray = np.vstack(constraints) if constraints else np.zeros((0, n_cols), dtype=np.uint8)
    kernel: np.ndarray = gf2_nullspace_basis(stacked) if stacked.shape[0] else np.eye(n_cols, dtype=np.uint8)

    torsion_rows: List[List[int]] = [kummer_image(curve, t).vector(primes) for t in two_torsion_points(curve)]
    presented: np.ndarray = to_gf2(torsion_rows + kernel.tolist(), n_cols=n_cols)
    chosen: List[int] = gf2_independent_rows(presented)
    basis: List[KummerTriple] = [KummerTriple.from_vector(presented[i], primes) for i in chosen]
    labels: List[str] = ["torsion" if i < len(torsion_rows) else "extra" for i in chosen]
    if len(chosen) != kernel.shape[0]:
        raise InconsistencyException(f"span of S^2({curve}) and its torsion images", kernel.shape[0], len(chosen))
    logger.debug(f"{curve} {primes=} dim={len(chosen)} basis={[str(b) for b in basis]}")
    return F2Subspace(basis=basis, matrix=presented[chosen], labels=labels)


def selmer_rank_bound(curve: CurveModel, selmer: Optional[F2Subspace[KummerTriple]] = None) -> int:
    """dim S^2 - dim E(Q)[2]; equals rank + dim Sha[2]"""
    return (selmer or selmer_Q(curve)).dimension - 2


def selmer_contains(selmer: F2Subspace[KummerTriple], triple: KummerTriple, curve: CurveModel) -> bool:
    primes: List[int] = bad_primes(curve)
    try:
        return selmer.contains_vector(triple.vector(primes))
    except ValueError:
        return False


# -------------------------------------------------------------------------------------------------
# points


_SIEVE_MODULI: Tuple[int, ...] = (64, 63, 65, 11, 17, 19, 23, 29, 31, 37)
_SQUARE_TABLES: Dict[int, np.ndarray] = {}
for _mod in _SIEVE_MODULI:
    _table = np.zeros(_mod, dtype=bool)
    _table[(np.arange(_mod, dtype=np.int64) ** 2) % _mod] = True
    _SQUARE_TABLES[_mod] = _table


def point_search(curve: CurveModel, height_bound: Optional[int] = None) -> List[CurvePoint]:
    """points with X = u/w^2 (short model X = d x), |u| <= height_bound, w^4 <= height_bound"""
    bound: int = height_bound or settings.POINT_SEARCH_EFFORT
    if bound < 1:
        raise ValueError(f"{bound=} must be positive")
    roots, d = _short_model(curve)
    us: np.ndarray = np.arange(-bound, bound + 1, dtype=np.int64)
    found: List[CurvePoint] = []
    for w in range(1, isqrt(isqrt(bound)) + 1):
        w2: int = w * w
        cand: np.ndarray = us if w == 1 else us[np.gcd(us, w) == 1]
        mask = np.ones(cand.shape, dtype=bool)
        for mod in _SIEVE_MODULI:
            prod = np.ones(cand.shape, dtype=np.int64)
            for r in roots:
                prod = (prod * ((cand - r * w2) % mod)) % mod
            mask &= _SQUARE_TABLES[mod][prod]
        for u in cand[mask].tolist():
            value: int = (u - roots[0] * w2) * (u - roots[1] * w2) * (u - roots[2] * w2)
            if value < 0:
                continue
            v: int = isqrt(value)
            if v * v != value:
                continue
            x: Fraction = Fraction(u, w2 * d)
            y: Fraction = Fraction(v, w2 * w * d * d)
            found.append(CurvePoint(x, y))
            if v:
                found.append(CurvePoint(x, -y))
    ret: List[CurvePoint] = sorted(OrderedSet(found), key=lambda p: (p.x.denominator, abs(p.x.numerator), p.x, p.y))
    for p in ret:
        curve.check_point(p)
    logger.debug(f"point search on {curve} up to {bound}: {len(ret)} points")
    return ret


def rank_lower_bound(curve: CurveModel, points: Sequence[CurvePoint], torsion: Optional[TorsionGroup] = None) -> int:
    """dim span(images of points and torsion) - dim E(Q)[2]"""
    tors: TorsionGroup = torsion or torsion_subgroup(curve)
    triples: List[KummerTriple] = [kummer_image(curve, p) for p in list(points) + tors.points]
    primes: List[int] = sorted({q for t in triples for q in t.primes()})
    rank: int = gf2_rank(to_gf2([t.vector(primes) for t in triples], n_cols=2 * (len(primes) + 1)))
    return max(rank - 2, 0)


def nontorsion_points(curve: CurveModel, points: Sequence[CurvePoint], torsion: Optional[TorsionGroup] = None) -> List[CurvePoint]:
    tors: TorsionGroup = torsion or torsion_subgroup(curve)
    return [p for p in points if p not in tors.points]


def independent_points(curve: CurveModel, points: Sequence[CurvePoint], torsion: Optional[TorsionGroup] = None) -> List[CurvePoint]:
    """points whose Kummer images are independent modulo the torsion images, picked greedily in order"""
    tors: TorsionGroup = torsion or torsion_subgroup(curve)
    candidates: List[CurvePoint] = nontorsion_points(curve, points, tors)
    tors_images: List[KummerTriple] = [kummer_image(curve, t) for t in tors.points]
    images: List[KummerTriple] = [kummer_image(curve, p) for p in candidates]
    primes: List[int] = sorted({q for t in tors_images + images for q in t.primes()})
    n_cols: int = 2 * (len(primes) + 1)
    rows: List[List[int]] = [t.vector(primes) for t in tors_images]
    rank: int = gf2_rank(to_gf2(rows, n_cols=n_cols))
    ret: List[CurvePoint] = []
    for pt, image in zip(candidates, images):
        trial: List[List[int]] = rows + [image.vector(primes)]
        trial_rank: int = gf2_rank(to_gf2(trial, n_cols=n_cols))
        if trial_rank > rank:
            rows, rank = trial, trial_rank
            ret.append(pt)
    return ret


def search_witnesses(curve: CurveModel, effort: Optional[int] = None, torsion: Optional[TorsionGroup] = None) -> List[CurvePoint]:
    """generators of a subgroup of E(Q)/E(Q)_tors found by the point search, independent in E(Q)/2E(Q)"""
    witnesses: List[CurvePoint] = independent_points(curve, point_search(curve, effort), torsion)
    logger.debug(f"{curve}: witnesses {[str(pt) for pt in witnesses]}")
    return witnesses


# -------------------------------------------------------------------------------------------------
# root number


def root_number_imag_quad(d: int) -> int:
    """w(X0(15)/Q(sqrt -d)) = (-1)^(1+s), s counting the split multiplicative places over 3 and 5"""
    if d <= 0 or squarefree_part(d) != d:
        raise ValueError(f"{d=} must be a positive squarefree integer")
    K: QuadField = QuadField(-d)
    # split multiplicative at 3 over Q: split over K iff 3 is inert
    s3: int = 1 if splitting_type(K, 3) == SplittingType.INERT else 0
    # nonsplit at 5 over Q: one split place for each prime of K over 5
    s5: int = 2 if splitting_type(K, 5) == SplittingType.SPLIT else 1
    return -1 if (1 + s3 + s5) % 2 else 1


def root_number_by_congruence(d: int) -> int:
    return 1 if d % 15 in (0, 1, 2, 3, 4, 5, 8, 12) else -1

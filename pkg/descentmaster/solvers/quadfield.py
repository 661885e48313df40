from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, isqrt
from threading import RLock
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import cachetools
import numpy as np
from loguru import logger
from ordered_set import OrderedSet
from sympy import primefactors
from sympy.ntheory import multiplicity, sqrt_mod

from descentmaster.datastructures.models_and_schemas import SplittingType
from descentmaster.solvers.curvemodels import (
    InconsistencyException,
    KSGroupConstructionException,
    PrecisionException,
    UnsupportedCompletionException,
    UnsupportedConfigurationException,
    class_vector,
)
from descentmaster.solvers.gf2 import gf2_independent_rows, gf2_rank, gf2_solve_rowspan, to_gf2
from descentmaster.solvers.squareclasses import (
    LocalSquareClass,
    Place,
    Rational,
    hensel_sqrt,
    hilbert_symbol,
    legendre,
    local_square_class,
    squarefree_part,
)
from descentmaster.utils.configuration import settings


_cache_lock: RLock = RLock()
_unit_cache: cachetools.LRUCache = cachetools.LRUCache(maxsize=256)
_norm_cache: cachetools.LRUCache = cachetools.LRUCache(maxsize=4096)
_embed_cache: cachetools.LRUCache = cachetools.LRUCache(maxsize=65536)


@dataclass(frozen=True)
class QuadField:
    """K = Q(sqrt(m)); every operation except the unit/K(S) machinery also accepts m < 0"""

    m: int

    def __post_init__(self) -> None:
        if self.m in (0, 1) or squarefree_part(self.m) != self.m:
            raise ValueError(f"{self.m=} must be squarefree and different from 0, 1")

    @property
    def disc(self) -> int:
        return self.m if self.m % 4 == 1 else 4 * self.m

    @property
    def is_real(self) -> bool:
        return self.m > 1

    def disc_primes(self) -> List[int]:
        return [int(p) for p in primefactors(abs(self.disc))]

    def element(self, a: Rational, b: Rational = 0, c: int = 1) -> QuadFieldElem:
        return QuadFieldElem.of(self.m, a, b, c)

    def require_real(self) -> None:
        if not self.is_real:
            raise UnsupportedConfigurationException(f"{self} is imaginary, only real quadratic fields are supported")

    def __str__(self) -> str:
        return f"Q(sqrt({self.m}))"


@dataclass(frozen=True)
class QuadFieldElem:
    """(a + b*sqrt(m)) / c with gcd(a, b, c) = 1 and c > 0"""

    m: int
    a: int
    b: int
    c: int = 1

    @staticmethod
    def of(m: int, a: Rational, b: Rational = 0, c: Rational = 1) -> QuadFieldElem:
        if Fraction(c) == 0:
            raise ZeroDivisionError("zero denominator")
        fa, fb = Fraction(a) / Fraction(c), Fraction(b) / Fraction(c)
        den: int = fa.denominator * fb.denominator // gcd(fa.denominator, fb.denominator)
        na: int = int(fa * den)
        nb: int = int(fb * den)
        g: int = gcd(gcd(na, nb), den)
        return QuadFieldElem(m, na // g, nb // g, den // g)

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def is_rational(self) -> bool:
        return self.b == 0

    def conj(self) -> QuadFieldElem:
        return QuadFieldElem(self.m, self.a, -self.b, self.c)

    def norm(self) -> Fraction:
        return Fraction(self.a * self.a - self.m * self.b * self.b, self.c * self.c)

    def trace(self) -> Fraction:
        return Fraction(2 * self.a, self.c)

    def __mul__(self, other: object) -> QuadFieldElem:
        if isinstance(other, (int, Fraction)):
            return QuadFieldElem.of(self.m, self.a * Fraction(other), self.b * Fraction(other), self.c)
        if not isinstance(other, QuadFieldElem):
            return NotImplemented
        if other.m != self.m:
            raise ValueError(f"elements of different fields {self.m} {other.m}")
        return QuadFieldElem.of(
            self.m,
            self.a * other.a + self.m * self.b * other.b,
            self.a * other.b + self.b * other.a,
            self.c * other.c,
        )

    __rmul__ = __mul__

    def __truediv__(self, other: QuadFieldElem) -> QuadFieldElem:
        n: Fraction = other.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in K")
        top: QuadFieldElem = self * other.conj()
        return QuadFieldElem.of(self.m, Fraction(top.a) / n, Fraction(top.b) / n, top.c)

    def __pow__(self, k: int) -> QuadFieldElem:
        ret: QuadFieldElem = QuadFieldElem(self.m, 1, 0, 1)
        for _ in range(k):
            ret = ret * self
        return ret

    def real_sign(self, index: int = 0) -> int:
        """sign under sqrt(m) -> +sqrt(m) (index 0) or -sqrt(m) (index 1), decided exactly"""
        b: int = self.b if index == 0 else -self.b
        a: int = self.a
        if b == 0:
            return 1 if a > 0 else -1
        if a >= 0 and b > 0:
            return 1
        if a <= 0 and b < 0:
            return -1
        return (1 if a > 0 else -1) if a * a > self.m * b * b else (1 if b > 0 else -1)

    def reprJSON(self) -> Dict[str, int]:
        return {"a": self.a, "b": self.b, "c": self.c, "m": self.m}

    def __str__(self) -> str:
        body: str = f"{self.a}{'+' if self.b >= 0 else '-'}{abs(self.b)}*sqrt({self.m})"
        return body if self.c == 1 else f"({body})/{self.c}"


@dataclass(frozen=True)
class KSquareClass:
    """element of K*/K*^2 stored as an integral primitive representative"""

    rep: QuadFieldElem

    @staticmethod
    def of(x: QuadFieldElem) -> KSquareClass:
        return KSquareClass(reduce_rep(x))

    def __mul__(self, other: KSquareClass) -> KSquareClass:
        return KSquareClass.of(self.rep * other.rep)

    def equivalent(self, other: KSquareClass) -> bool:
        return is_square_in_K(self.rep / other.rep)

    def norm_class(self) -> int:
        return int(squarefree_part(self.rep.norm()))

    def reprJSON(self) -> Dict[str, int]:
        return self.rep.reprJSON()

    def __str__(self) -> str:
        return str(self.rep)


def reduce_rep(x: QuadFieldElem) -> QuadFieldElem:
    """same square class, integral in Z[sqrt m], content reduced to its squarefree part"""
    if x.is_zero():
        raise ValueError("zero has no square class")
    a, b = x.a * x.c, x.b * x.c
    g: int = gcd(a, b)
    s: int = int(squarefree_part(g)) if g else 1
    return QuadFieldElem(x.m, (a // g) * s, (b // g) * s, 1)


class PlaceOfK(NamedTuple):
    """place of K above a rational place; prime=0 is real (index 0: sqrt(m) > 0)"""

    prime: int
    index: int = 0

    @property
    def rational_place(self) -> Place:
        return Place(self.prime)

    @property
    def is_real(self) -> bool:
        return self.prime == 0

    def conjugate(self) -> PlaceOfK:
        return PlaceOfK(self.prime, 1 - self.index)

    def completion(self) -> str:
        return "R" if self.is_real else f"Q_{self.prime}"

    def __str__(self) -> str:
        return f"{'inf' if self.is_real else self.prime}.{self.index}"


def splitting_type(K: QuadField, ell: int) -> SplittingType:
    if K.disc % ell == 0:
        return SplittingType.RAMIFIED
    if ell == 2:
        return SplittingType.SPLIT if K.m % 8 == 1 else SplittingType.INERT
    return SplittingType.SPLIT if legendre(K.m, ell) == 1 else SplittingType.INERT


def places_over(K: QuadField, ell: int) -> List[PlaceOfK]:
    if splitting_type(K, ell) == SplittingType.SPLIT:
        return [PlaceOfK(ell, 0), PlaceOfK(ell, 1)]
    return [PlaceOfK(ell, 0)]


def real_places(K: QuadField) -> List[PlaceOfK]:
    K.require_real()
    return [PlaceOfK(0, 0), PlaceOfK(0, 1)]


def _branch(K: QuadField, place: PlaceOfK) -> int:
    if place.prime == 2:
        return 1 if place.index == 0 else 3
    roots: List[int] = sorted(int(r) for r in sqrt_mod(K.m % place.prime, place.prime, all_roots=True))
    return roots[place.index]


def describe_place(K: QuadField, place: PlaceOfK) -> str:
    """the identification of the completion, e.g. 'Q_5: sqrt(241) = 1 mod 5'"""
    if place.is_real:
        return f"R: sqrt({K.m}) {'>' if place.index == 0 else '<'} 0"
    modulus: int = 4 if place.prime == 2 else place.prime
    return f"Q_{place.prime}: sqrt({K.m}) = {_branch(K, place)} mod {modulus}"


def _embed_at(K: QuadField, x: QuadFieldElem, place: PlaceOfK, precision: int) -> LocalSquareClass:
    ell: int = place.prime
    root: Optional[int] = hensel_sqrt(K.m, ell, precision, near=_branch(K, place))
    if root is None:
        raise UnsupportedCompletionException(f"{K.m} has no square root in Q_{ell}")
    modulus: int = ell**precision
    value: int = (x.a + x.b * root) % modulus
    if value == 0:
        raise PrecisionException(f"{x} vanishes mod {ell}^{precision}")
    v: int = int(multiplicity(ell, value))
    if precision - v < (3 if ell == 2 else 1):
        raise PrecisionException(f"{x} at {place}: only {precision - v} digits of the unit part")
    unit: int = value // ell**v
    cls: LocalSquareClass = local_square_class(unit * ell ** (v % 2), Place(ell))
    return cls * local_square_class(x.c, Place(ell))


def embed(x: QuadFieldElem, place: PlaceOfK, precision: Optional[int] = None) -> LocalSquareClass:
    """square class of x in the completion at place (Q_ell for split ell, or R)"""
    if x.is_zero():
        raise ValueError("zero has no square class")
    if place.is_real:
        return LocalSquareClass(Place.real(), x.real_sign(place.index), 0)
    K: QuadField = QuadField(x.m)
    if splitting_type(K, place.prime) != SplittingType.SPLIT:
        raise UnsupportedCompletionException(f"completion of {K} at {place.prime} is not Q_{place.prime}")
    key = (x, place)
    with _cache_lock:
        hit: Optional[LocalSquareClass] = _embed_cache.get(key)
    if hit is not None:
        return hit
    prec: int = precision or settings.HENSEL_PRECISION_START
    while prec <= settings.HENSEL_PRECISION_MAX:
        try:
            cls: LocalSquareClass = _embed_at(K, x, place, prec)
            with _cache_lock:
                _embed_cache[key] = cls
            return cls
        except PrecisionException as pe:
            logger.debug(f"{pe} -> doubling precision")
            prec *= 2
    raise PrecisionException(f"{x} at {place} undecided at precision {settings.HENSEL_PRECISION_MAX}")


def _rational_sqrt(q: Fraction) -> Optional[Fraction]:
    if q < 0:
        return None
    n, d = isqrt(q.numerator), isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


def is_square_in_K(x: QuadFieldElem) -> bool:
    """y = u + v*sqrt(m) with y^2 = x forces N(y)^2 = N(x) and (2u)^2 = Tr(x) + 2N(y)"""
    if x.is_zero():
        raise ValueError("zero has no square class")
    nu: Optional[Fraction] = _rational_sqrt(x.norm())
    if nu is None:
        return False
    xa: Fraction = Fraction(x.a, x.c)
    xb: Fraction = Fraction(x.b, x.c)
    for n in (nu, -nu):
        four_u2: Fraction = x.trace() + 2 * n
        two_u: Optional[Fraction] = _rational_sqrt(four_u2)
        if two_u is None:
            continue
        if two_u == 0:
            v2: Optional[Fraction] = _rational_sqrt(xa / x.m) if xb == 0 else None
            if v2 is not None:
                return True
            continue
        u: Fraction = two_u / 2
        v: Fraction = xb / (2 * u)
        if u * u + x.m * v * v == xa and 2 * u * v == xb:
            return True
    return False


@cachetools.cached(cache=_unit_cache, lock=_cache_lock)
def fundamental_unit(K: QuadField) -> QuadFieldElem:
    """epsilon > 1 from the continued fraction of sqrt(m) (or (1+sqrt(m))/2)"""
    K.require_real()
    m: int = K.m
    p0, q0 = (1, 2) if m % 4 == 1 else (0, 1)
    root: int = isqrt(m)
    p, q = p0, q0
    g_prev2, g_prev1 = -p0, q0
    b_prev2, b_prev1 = 1, 0
    for step in range(10_000_000):
        a_i: int = (p + root) // q
        g_i: int = a_i * g_prev1 + g_prev2
        b_i: int = a_i * b_prev1 + b_prev2
        p = a_i * q - p
        q = (m - p * p) // q
        if q == q0:
            unit: QuadFieldElem = QuadFieldElem.of(m, g_i, b_i, q0)
            logger.debug(f"{K} fundamental unit after {step + 1} partial quotients, norm {unit.norm()}")
            return unit
        g_prev2, g_prev1 = g_prev1, g_i
        b_prev2, b_prev1 = b_prev1, b_i
    raise InconsistencyException(f"continued fraction period of {K}", "finite", "unbounded")


def norm_locally_solvable(m: int, d: int) -> bool:
    """d is a norm from Q(sqrt m) iff (m, d)_v = 1 at every place"""
    places: List[Place] = [Place.real()] + [Place(int(p)) for p in primefactors(2 * abs(m) * abs(d))]
    return all(hilbert_symbol(m, d, v) == 1 for v in places)


@cachetools.cached(cache=_norm_cache, lock=_cache_lock)
def solve_norm_equation(K: QuadField, d: int) -> Optional[QuadFieldElem]:
    """primitive x = a + b*sqrt(m) with N(x) in d*Q*^2, smallest (b, a) within the Holzer bounds"""
    d = int(squarefree_part(d))
    if d == 1:
        return K.element(1)
    if not norm_locally_solvable(K.m, d):
        return None
    # a^2 - m b^2 = d c^2 has a solution with b <= sqrt|d| and |a| <= sqrt(m|d|)
    a_max: int = isqrt(abs(K.m * d)) + 1
    for b in range(1, isqrt(abs(d)) + 2):
        mb2: int = K.m * b * b
        for a in range(0, a_max + 1):
            n: int = a * a - mb2
            if n == 0 or n % d:
                continue
            c2: int = n // d
            if c2 > 0 and isqrt(c2) ** 2 == c2:
                g: int = gcd(a, b)
                return K.element(a // g, b // g)
    raise InconsistencyException(f"norm equation N(x) = {d} in {K}", "solution within Holzer bounds", None)


def class_group_2_rank(K: QuadField) -> int:
    """genus theory: t-1 when the odd discriminant primes are all 1 mod 4 (or K imaginary), else t-2"""
    t: int = len(K.disc_primes())
    if not K.is_real:
        return t - 1
    sum_of_squares: bool = all(p % 4 == 1 for p in K.disc_primes() if p != 2)
    rank: int = t - 1 if sum_of_squares else t - 2
    if not sum_of_squares and K.m < 10**6 and fundamental_unit(K).norm() == -1:
        raise InconsistencyException(f"unit norm of {K}", 1, -1)
    return rank


def twisting_subgroup(K: QuadField, d: int) -> List[int]:
    """generators of the rational classes to twist by: d, -1 when d = 3 mod 4, and the primes of m

    for d = 3 this is <3, -1, p>, the same group as <-1, -3, p>
    """
    gens: OrderedSet[int] = OrderedSet([int(squarefree_part(d))])
    if d % 4 == 3:
        gens.add(-1)
    for p in primefactors(abs(K.m)):
        gens.add(int(p))
    return [g for g in gens if g != 1]


def odd_ramification(K: QuadField, x: QuadFieldElem) -> Dict[int, int]:
    """odd rational primes l -> number of places over l where x has odd valuation (with their norm exponent)"""
    rep: QuadFieldElem = reduce_rep(x)
    a, b = rep.a, rep.b
    g: int = gcd(a, b)
    s: int = int(squarefree_part(g)) if g else 1
    prim_norm: int = (a // g) ** 2 - K.m * (b // g) ** 2
    ret: Dict[int, int] = {}
    for ell in primefactors(abs(prim_norm * s)):
        ell = int(ell)
        if ell == 2:
            continue
        vn: int = int(multiplicity(ell, abs(prim_norm)))
        vs: int = int(multiplicity(ell, abs(s)))
        kind: SplittingType = splitting_type(K, ell)
        if kind == SplittingType.SPLIT:
            count: int = ((vn + vs) % 2) + (vs % 2)
        elif kind == SplittingType.INERT:
            count = 2 if (vn // 2 + vs) % 2 else 0  # residue degree 2
        else:
            count = vn % 2
        if count:
            ret[ell] = count
    return ret


def relative_discriminant_norm(K: QuadField, x: QuadFieldElem) -> int:
    """absolute norm of the relative discriminant of K(sqrt x)/K; 2 must split in K"""
    if splitting_type(K, 2) != SplittingType.SPLIT:
        raise UnsupportedConfigurationException(f"2 does not split in {K}")
    norm: int = 1
    for ell, count in odd_ramification(K, x).items():
        norm *= ell**count
    for place in places_over(K, 2):
        cls: LocalSquareClass = embed(x, place)
        if cls.val_parity:
            norm *= 2**3
        elif cls.unit_part in (-1, 3):
            norm *= 2**2
    return norm


def minimally_ramified_generator(K: QuadField, d: int) -> Optional[KSquareClass]:
    """x_d with N(x_d) in d*Q*^2 of smallest relative discriminant within its twisting orbit"""
    x0: Optional[QuadFieldElem] = solve_norm_equation(K, d)
    if x0 is None:
        return None
    gens: List[int] = twisting_subgroup(K, d)
    # x0 is only fixed up to the primes of c in N(x0) = d*c^2
    content: Fraction = Fraction(x0.norm()) / d
    for p in sorted({int(p) for p in primefactors(content.numerator * content.denominator)} | {2}):
        if p not in gens:
            gens.append(p)
    allowed: set = {int(p) for p in primefactors(2 * abs(d) * abs(K.disc))}
    best: Optional[Tuple[Tuple[int, int, Tuple[int, int, int]], QuadFieldElem]] = None
    for exps in itertools.product((0, 1), repeat=len(gens)):
        t: int = 1
        for e, g in zip(exps, gens):
            if e:
                t *= g
        cand: QuadFieldElem = reduce_rep(x0 * t)
        if not set(odd_ramification(K, cand)).issubset(allowed):
            continue
        real_ramified: int = sum(1 for idx in (0, 1) if cand.real_sign(idx) < 0)
        key = (relative_discriminant_norm(K, cand), real_ramified, (abs(cand.a), abs(cand.b), cand.c))
        if best is None or key < best[0]:
            best = (key, cand)
    if best is None:
        raise InconsistencyException(f"{K}({d=}) twisting orbit", f"a class unramified outside {sorted(allowed)}", None)
    logger.debug(f"{K} {d=}: minimally ramified {best[1]} with {best[0]=}")
    return KSquareClass(best[1])


def _genus_vector(ell: int, disc_primes: Sequence[int]) -> List[int]:
    vec: List[int] = []
    for p in disc_primes:
        if p == ell:
            others = [legendre(ell, q) for q in disc_primes if q != ell]
            vec.append(0 if int(np.prod(others)) == 1 else 1)
        else:
            vec.append(0 if legendre(ell, p) == 1 else 1)
    return vec


def s_class_group_2_dim(K: QuadField, s_primes: Sequence[int]) -> int:
    """dim Cl(R_S)[2] by genus characters of the places in S"""
    rank: int = class_group_2_rank(K)
    if rank == 0:
        return 0
    dprimes: List[int] = K.disc_primes()
    if 2 in dprimes or any(p % 4 != 1 for p in dprimes):
        raise UnsupportedConfigurationException(
            f"genus characters of {K} need an odd discriminant with all primes = 1 mod 4"
        )
    vectors: List[List[int]] = []
    for ell in s_primes:
        if splitting_type(K, ell) == SplittingType.INERT:
            continue
        vectors.append(_genus_vector(ell, dprimes))
    return rank - (gf2_rank(np.array(vectors, dtype=np.uint8)) if vectors else 0)


@dataclass
class KSGroup:
    """K(S) with S = places over `primes` and the real places"""

    field: QuadField
    primes: List[int]
    basis: List[KSquareClass]
    labels: List[str]
    norm_classes: List[int]  # d with lifted generators x_d
    lifts: List[QuadFieldElem]
    rational_gens: List[int]
    expected_dimension: int
    _transition: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.uint8), repr=False)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def _norm_basis_primes(self) -> List[int]:
        return list(self.primes)

    def _rational_primes(self) -> List[int]:
        return [abs(r) for r in self.rational_gens if r != -1]

    def structural_coordinates(self, x: QuadFieldElem) -> np.ndarray:
        """coordinates over lifts + rational generators"""
        primes: List[int] = self._norm_basis_primes()
        try:
            target: List[int] = class_vector(int(squarefree_part(x.norm())), primes)
        except ValueError as ve:
            raise ValueError(f"{x} is not in K(S): norm outside S") from ve
        lift_rows = to_gf2([class_vector(d, primes) for d in self.norm_classes], n_cols=len(primes) + 1)
        eps = gf2_solve_rowspan(lift_rows, target)
        if eps is None:
            raise ValueError(f"{x} is not in K(S): norm class not a norm of K(S)")
        rest: QuadFieldElem = x
        for e, lift in zip(eps, self.lifts):
            if e:
                rest = rest / lift
        rational: int = rational_class_of(rest)
        return np.concatenate([eps, self._rational_vector(rational)]).astype(np.uint8)

    def _rational_vector(self, r: int) -> np.ndarray:
        rprimes: List[int] = self._rational_primes()
        m_primes: List[int] = [int(p) for p in primefactors(self.field.m)]
        dropped: int = m_primes[-1]
        full_primes: List[int] = rprimes + [dropped]
        if r % dropped == 0:
            r = int(squarefree_part(r * self.field.m))
        try:
            vec: List[int] = class_vector(r, full_primes)
        except ValueError as ve:
            raise ValueError(f"rational class {r} is outside K(S)") from ve
        return np.array(vec[:-1], dtype=np.uint8)

    def coordinates(self, x: QuadFieldElem) -> np.ndarray:
        """exact coordinates of x over `basis`"""
        coeffs = gf2_solve_rowspan(self._transition, self.structural_coordinates(x))
        if coeffs is None:
            raise InconsistencyException("K(S) transition", "invertible", "singular")
        return coeffs

    def element(self, coeffs: Sequence[int]) -> KSquareClass:
        ret: QuadFieldElem = self.field.element(1)
        for c, b in zip(coeffs, self.basis):
            if c % 2:
                ret = reduce_rep(ret * b.rep)
        return KSquareClass(ret)

    def contains(self, x: QuadFieldElem) -> bool:
        try:
            self.structural_coordinates(x)
            return True
        except ValueError:
            return False


def rational_class_of(w: QuadFieldElem) -> int:
    """square class of a w with N(w) in Q*^2, as rational: w = n * z/conj(z) with z = 1 + w/n"""
    if w.is_rational():
        return int(squarefree_part(Fraction(w.a, w.c)))
    n: Optional[Fraction] = _rational_sqrt(w.norm())
    if n is None:
        raise ValueError(f"{w} has non-square norm {w.norm()}")
    z: QuadFieldElem = QuadFieldElem.of(w.m, Fraction(w.a, w.c) / n + 1, Fraction(w.b, w.c) / n)
    return int(squarefree_part(n * z.norm()))


def K_S_group(K: QuadField, s_primes: Sequence[int]) -> KSGroup:
    K.require_real()
    primes: List[int] = sorted(OrderedSet(int(p) for p in s_primes))
    unit_dim: int = 2 + sum(len(places_over(K, p)) for p in primes)
    expected: int = unit_dim + s_class_group_2_dim(K, primes)

    # norm image: signed products of S primes that are norms from K
    candidates: List[int] = []
    for exps in itertools.product((0, 1), repeat=len(primes) + 1):
        d: int = class_from_exps(exps, primes)
        if d != 1:
            candidates.append(d)
    candidates.sort(key=lambda t: (abs(t), t < 0))
    norm_classes: List[int] = []
    lifts: List[QuadFieldElem] = []
    for d in candidates:
        rows = to_gf2([class_vector(x, primes) for x in norm_classes], n_cols=len(primes) + 1)
        if norm_classes and gf2_solve_rowspan(rows, class_vector(d, primes)) is not None:
            continue
        gen: Optional[KSquareClass] = minimally_ramified_generator(K, d)
        if gen is None:
            continue
        norm_classes.append(d)
        lifts.append(gen.rep)

    rational_gens: List[int] = [-1] + [p for p in OrderedSet(primes + K.disc_primes())]
    m_primes: List[int] = [int(p) for p in primefactors(K.m)]
    rational_gens = [r for r in rational_gens if r != m_primes[-1]]

    built: int = len(lifts) + len(rational_gens)
    if built != expected:
        raise InconsistencyException(f"dim K(S) for {K}, S={primes}", expected, built)

    group: KSGroup = KSGroup(
        field=K,
        primes=primes,
        basis=[],
        labels=[],
        norm_classes=norm_classes,
        lifts=lifts,
        rational_gens=rational_gens,
        expected_dimension=expected,
    )
    # present the basis as conjugate pairs x_d, y_d completed by rationals
    presented: List[Tuple[str, QuadFieldElem]] = []
    for d, lift in zip(norm_classes, lifts):
        presented.append((f"x_{d}", lift))
        presented.append((f"y_{d}", lift.conj()))
    presented += [(str(r), K.element(r)) for r in rational_gens]
    rows = np.vstack([group.structural_coordinates(x) for _, x in presented])
    chosen: List[int] = gf2_independent_rows(rows)
    if len(chosen) != built:
        raise KSGroupConstructionException(f"K(S) basis of {K} has rank {len(chosen)} < {built}")
    group.basis = [KSquareClass(presented[i][1]) for i in chosen]
    group.labels = [presented[i][0] for i in chosen]
    group._transition = rows[chosen]
    logger.debug(f"K(S) of {K} for {primes=}: {group.labels}")
    return group


def class_from_exps(exps: Sequence[int], primes: Sequence[int]) -> int:
    value: int = -1 if exps[0] else 1
    for e, p in zip(exps[1:], primes):
        if e:
            value *= p
    return value


def hilbert_symbol_K(x: QuadFieldElem, y: QuadFieldElem, place: PlaceOfK) -> int:
    """(x, y) at a place whose completion is Q_ell or R"""
    return hilbert_symbol(embed(x, place).rep, embed(y, place).rep, place.rational_place)

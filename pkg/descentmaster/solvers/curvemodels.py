from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Generic, List, NamedTuple, Optional, Sequence, Tuple, TypeVar

import numpy as np
from sympy import primefactors

from descentmaster.solvers.gf2 import gf2_rank, gf2_solve_rowspan, to_gf2
from descentmaster.solvers.squareclasses import (
    LocalSquareClass,
    Place,
    Rational,
    SquareClassQ,
    local_square_class,
    squarefree_part,
)


X015_ROOTS: Tuple[int, int, int] = (-13, -4, 12)  # y^2 = (x+13)(x+4)(x-12)


class DescentException(Exception):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class UnsupportedConfigurationException(DescentException):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class UnsupportedCompletionException(UnsupportedConfigurationException):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class UnsupportedShapeException(UnsupportedConfigurationException):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class InconsistencyException(DescentException):
    def __init__(self, what: str, expected: object, actual: object) -> None:
        super().__init__(f"{what}: expected {expected!r}, got {actual!r}")
        self.what = what
        self.expected = expected
        self.actual = actual


class PrecisionException(DescentException):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class LocalImageBudgetException(DescentException):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class NotOnCurveException(DescentException):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class RedeiUndefinedException(DescentException):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class KSGroupConstructionException(DescentException):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class DependencyException(DescentException):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


T = TypeVar("T")


class CurvePoint(NamedTuple):
    x: Fraction = Fraction(0)
    y: Fraction = Fraction(0)
    infinity: bool = False

    @staticmethod
    def at_infinity() -> CurvePoint:
        return CurvePoint(infinity=True)

    @staticmethod
    def of(x: Rational, y: Rational) -> CurvePoint:
        return CurvePoint(Fraction(x), Fraction(y))

    def is_two_torsion(self) -> bool:
        return not self.infinity and self.y == 0

    def __str__(self) -> str:
        return "O" if self.infinity else f"({self.x}, {self.y})"


@dataclass(frozen=True)
class CurveModel:
    """d*y^2 = (x-e1)(x-e2)(x-e3)"""

    e1: int
    e2: int
    e3: int
    d: int = 1

    def __post_init__(self) -> None:
        if len({self.e1, self.e2, self.e3}) != 3:
            raise ValueError(f"roots must be distinct: {self.roots}")
        if self.d == 0 or squarefree_part(self.d) != self.d:
            raise ValueError(f"twist {self.d} must be squarefree and nonzero")

    @staticmethod
    def x015(d: int = 1) -> CurveModel:
        return CurveModel(*X015_ROOTS, d=d)

    @property
    def roots(self) -> Tuple[int, int, int]:
        return (self.e1, self.e2, self.e3)

    def twist(self, d: int) -> CurveModel:
        return CurveModel(self.e1, self.e2, self.e3, d=d)

    def permuted(self, order: Sequence[int]) -> CurveModel:
        r = self.roots
        return CurveModel(r[order[0]], r[order[1]], r[order[2]], d=self.d)

    def f(self, x: Rational) -> Fraction:
        fx = Fraction(x)
        return (fx - self.e1) * (fx - self.e2) * (fx - self.e3)

    def coefficients(self) -> Tuple[int, int, int]:
        """a2, a4, a6 of x^3 + a2 x^2 + a4 x + a6"""
        e1, e2, e3 = self.roots
        return (-(e1 + e2 + e3), e1 * e2 + e1 * e3 + e2 * e3, -e1 * e2 * e3)

    def root_differences(self) -> List[int]:
        return [a - b for a, b in combinations(self.roots, 2)]

    def contains(self, point: CurvePoint) -> bool:
        if point.infinity:
            return True
        return self.d * point.y * point.y == self.f(point.x)

    def check_point(self, point: CurvePoint) -> None:
        if not self.contains(point):
            raise NotOnCurveException(f"{point} is not on {self}")

    def __str__(self) -> str:
        return f"{self.d}*y^2 = (x - {self.e1})(x - {self.e2})(x - {self.e3})"


def negate_point(point: CurvePoint) -> CurvePoint:
    if point.infinity:
        return point
    return CurvePoint(point.x, -point.y)


def double_point(curve: CurveModel, point: CurvePoint) -> CurvePoint:
    if point.infinity or point.y == 0:
        return CurvePoint.at_infinity()
    a2, a4, _ = curve.coefficients()
    x1 = point.x
    slope: Fraction = (3 * x1 * x1 + 2 * a2 * x1 + a4) / (2 * curve.d * point.y)
    x3: Fraction = curve.d * slope * slope - a2 - 2 * x1
    return CurvePoint(x3, -(point.y + slope * (x3 - x1)))


def add_points(curve: CurveModel, p: CurvePoint, q: CurvePoint) -> CurvePoint:
    """chord-and-tangent law on d*y^2 = f(x)"""
    if p.infinity:
        return q
    if q.infinity:
        return p
    if p.x == q.x:
        if p.y == -q.y:
            return CurvePoint.at_infinity()
        return double_point(curve, p)
    a2, _, _ = curve.coefficients()
    slope: Fraction = (q.y - p.y) / (q.x - p.x)
    x3: Fraction = curve.d * slope * slope - a2 - p.x - q.x
    return CurvePoint(x3, -(p.y + slope * (x3 - p.x)))


def multiply_point(curve: CurveModel, n: int, point: CurvePoint) -> CurvePoint:
    ret: CurvePoint = CurvePoint.at_infinity()
    for _ in range(n):
        ret = add_points(curve, ret, point)
    return ret


def class_vector(c: int, primes: Sequence[int]) -> List[int]:
    """exponent vector of a squarefree class over the basis [-1] + primes"""
    vec: List[int] = [1 if c < 0 else 0]
    rest: int = abs(c)
    for p in primes:
        if rest % p == 0:
            vec.append(1)
            rest //= p
        else:
            vec.append(0)
    if rest != 1:
        raise ValueError(f"class {c} has primes outside {list(primes)}")
    return vec


def class_from_vector(vec: Sequence[int], primes: Sequence[int]) -> SquareClassQ:
    value: int = -1 if vec[0] % 2 else 1
    for bit, p in zip(vec[1:], primes):
        if bit % 2:
            value *= p
    return SquareClassQ._trusted(value)


@dataclass(frozen=True)
class KummerTriple:
    c1: SquareClassQ
    c2: SquareClassQ
    c3: SquareClassQ

    def __post_init__(self) -> None:
        if squarefree_part(int(self.c1) * int(self.c2) * int(self.c3)) != 1:
            raise ValueError(f"{self.as_tuple()} violates the kernel condition")

    @staticmethod
    def of(c1: Rational, c2: Rational, c3: Rational) -> KummerTriple:
        return KummerTriple(squarefree_part(c1), squarefree_part(c2), squarefree_part(c3))

    @staticmethod
    def trivial() -> KummerTriple:
        return KummerTriple.of(1, 1, 1)

    def as_tuple(self) -> Tuple[int, int, int]:
        return (int(self.c1), int(self.c2), int(self.c3))

    def is_trivial(self) -> bool:
        return self.as_tuple() == (1, 1, 1)

    def __mul__(self, other: KummerTriple) -> KummerTriple:
        return KummerTriple(self.c1 * other.c1, self.c2 * other.c2, self.c3 * other.c3)

    def primes(self) -> List[int]:
        return sorted({p for c in self.as_tuple() for p in _prime_divisors(c)})

    def vector(self, primes: Sequence[int]) -> List[int]:
        """first two coordinates over [-1] + primes; the third is their product"""
        return class_vector(self.c1, primes) + class_vector(self.c2, primes)

    @staticmethod
    def from_vector(vec: Sequence[int], primes: Sequence[int]) -> KummerTriple:
        n: int = len(primes) + 1
        c1 = class_from_vector(vec[:n], primes)
        c2 = class_from_vector(vec[n : 2 * n], primes)
        return KummerTriple(c1, c2, c1 * c2)

    def reprJSON(self) -> List[int]:
        return list(self.as_tuple())

    def __str__(self) -> str:
        return "({}, {}, {})".format(*self.as_tuple())


def _prime_divisors(c: int) -> List[int]:
    return [int(p) for p in primefactors(abs(c))]


@dataclass(frozen=True)
class LocalKummerTriple:
    place: Place
    classes: Tuple[LocalSquareClass, LocalSquareClass, LocalSquareClass]

    def __post_init__(self) -> None:
        product = self.classes[0] * self.classes[1] * self.classes[2]
        if not product.is_trivial():
            raise ValueError(f"{self.reps()} at {self.place} has nontrivial product")

    @staticmethod
    def of(place: Place, c1: Rational, c2: Rational, c3: Rational) -> LocalKummerTriple:
        return LocalKummerTriple(place, tuple(local_square_class(c, place) for c in (c1, c2, c3)))  # type: ignore

    def bits(self) -> List[int]:
        return [b for c in self.classes for b in c.bits()]

    @staticmethod
    def from_bits(place: Place, bits: Sequence[int]) -> LocalKummerTriple:
        n: int = place.n_bits()
        return LocalKummerTriple(
            place, tuple(LocalSquareClass.from_bits(place, bits[i * n : (i + 1) * n]) for i in range(3))  # type: ignore
        )

    def reps(self) -> Tuple[int, int, int]:
        return (self.classes[0].rep, self.classes[1].rep, self.classes[2].rep)

    def __mul__(self, other: LocalKummerTriple) -> LocalKummerTriple:
        return LocalKummerTriple(self.place, tuple(a * b for a, b in zip(self.classes, other.classes)))  # type: ignore

    def __str__(self) -> str:
        return "({}, {}, {})".format(*self.reps())


@dataclass
class F2Subspace(Generic[T]):
    """span of basis; matrix rows are the exponent vectors of the basis elements"""

    basis: List[T]
    matrix: np.ndarray
    labels: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.matrix = to_gf2(self.matrix)
        if gf2_rank(self.matrix) != len(self.basis):
            raise InconsistencyException("basis independence", len(self.basis), gf2_rank(self.matrix))

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def contains_vector(self, vec: Sequence[int]) -> bool:
        return gf2_solve_rowspan(self.matrix, vec) is not None

    def coefficients(self, vec: Sequence[int]) -> Optional[np.ndarray]:
        return gf2_solve_rowspan(self.matrix, vec)


@dataclass
class TorsionGroup:
    structure: str  # "Z/2xZ/2", "Z/4xZ/2", ...
    order: int
    points: List[CurvePoint]
    generators: List[CurvePoint]

    def points_of_order(self, curve: CurveModel, n: int) -> List[CurvePoint]:
        ret: List[CurvePoint] = []
        for pt in self.points:
            orders = [k for k in range(1, n + 1) if multiply_point(curve, k, pt).infinity]
            if orders and orders[0] == n:
                ret.append(pt)
        return ret

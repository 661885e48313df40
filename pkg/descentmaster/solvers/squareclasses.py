from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from threading import RLock
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Set, Tuple, Union

import cachetools
from loguru import logger

from sympy import primerange
from sympy.ntheory import isprime, legendre_symbol, multiplicity, sqrt_mod
from sympy.ntheory.factor_ import core


Rational = Union[int, Fraction]

_nonresidue_cache: cachetools.LRUCache = cachetools.LRUCache(maxsize=4096)
_nonresidue_lock: RLock = RLock()

# 2-adic units mod 8 on the basis <-1, 3>
_UNIT2_CLASS: Dict[int, int] = {1: 1, 3: 3, 5: -3, 7: -1}
_UNIT2_BITS: Dict[int, Tuple[int, int]] = {1: (0, 0), -1: (1, 0), 3: (0, 1), -3: (1, 1)}
_BITS_UNIT2: Dict[Tuple[int, int], int] = {v: k for k, v in _UNIT2_BITS.items()}


def num_den(x: Rational) -> Tuple[int, int]:
    """coprime numerator and positive denominator"""
    fx: Fraction = Fraction(x)
    return fx.numerator, fx.denominator


class SquareClassQ(int):
    """element of Q*/Q*^2 as its signed squarefree representative"""

    def __new__(cls, rep: int) -> SquareClassQ:
        if rep == 0:
            raise ValueError("zero has no square class")
        if core(abs(rep)) != abs(rep):
            raise ValueError(f"{rep} is not squarefree")
        return super().__new__(cls, rep)

    @classmethod
    def _trusted(cls, rep: int) -> SquareClassQ:
        return super().__new__(cls, rep)

    @property
    def rep(self) -> int:
        return int(self)

    def __mul__(self, other: object) -> SquareClassQ:  # type: ignore[override]
        if not isinstance(other, int):
            return NotImplemented
        if isinstance(other, SquareClassQ):
            g: int = gcd(int(self), int(other))
            return SquareClassQ._trusted((int(self) // g) * (int(other) // g))
        return squarefree_part(int(self) * other)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"SquareClassQ({int(self)})"


def squarefree_part(n: Rational) -> SquareClassQ:
    """squarefree m with n/m a positive rational square"""
    num, den = num_den(n)
    if num == 0:
        raise ValueError("zero has no square class")
    value: int = num * den
    sign: int = -1 if value < 0 else 1
    return SquareClassQ._trusted(sign * int(core(abs(value))))


def valuation(x: Rational, ell: int) -> int:
    num, den = num_den(x)
    if num == 0:
        raise ValueError("valuation of zero")
    return int(multiplicity(ell, abs(num))) - int(multiplicity(ell, den))


def legendre(a: int, p: int) -> int:
    if p == 2 or not isprime(p):
        raise ValueError(f"{p=} is not an odd prime")
    return int(legendre_symbol(a % p, p))


@cachetools.cached(cache=_nonresidue_cache, lock=_nonresidue_lock)
def nonresidue(ell: int) -> int:
    """smallest positive quadratic nonresidue mod ell"""
    u: int = 2
    while legendre(u, ell) != -1:
        u += 1
    return u


class Place(NamedTuple):
    """a place of Q: a rational prime, or prime=0 for the real place"""

    prime: int = 0

    @staticmethod
    def real() -> Place:
        return Place(0)

    @staticmethod
    def finite(ell: int) -> Place:
        if not isprime(ell):
            raise ValueError(f"{ell=} is not prime")
        return Place(ell)

    @property
    def is_real(self) -> bool:
        return self.prime == 0

    def n_bits(self) -> int:
        """F2-dimension of the local square-class group"""
        if self.is_real:
            return 1
        return 3 if self.prime == 2 else 2

    def canonical_reps(self) -> List[int]:
        """one representative per local square class, in bit order"""
        return [LocalSquareClass.from_bits(self, bits).rep for bits in itertools.product((0, 1), repeat=self.n_bits())]

    def __str__(self) -> str:
        return "inf" if self.is_real else str(self.prime)


@dataclass(frozen=True)
class LocalSquareClass:
    place: Place
    unit_part: int
    val_parity: int = 0

    @property
    def rep(self) -> int:
        if self.place.is_real or not self.val_parity:
            return self.unit_part
        return self.unit_part * self.place.prime

    def bits(self) -> Tuple[int, ...]:
        """exponent vector: real [sign]; ell=2 [val, -1, 3]; odd ell [val, nonresidue]"""
        if self.place.is_real:
            return (1 if self.unit_part < 0 else 0,)
        if self.place.prime == 2:
            return (self.val_parity,) + _UNIT2_BITS[self.unit_part]
        return (self.val_parity, 0 if self.unit_part == 1 else 1)

    @staticmethod
    def from_bits(place: Place, bits: Sequence[int]) -> LocalSquareClass:
        if place.is_real:
            return LocalSquareClass(place, -1 if bits[0] % 2 else 1, 0)
        if place.prime == 2:
            return LocalSquareClass(place, _BITS_UNIT2[(bits[1] % 2, bits[2] % 2)], bits[0] % 2)
        return LocalSquareClass(place, nonresidue(place.prime) if bits[1] % 2 else 1, bits[0] % 2)

    def is_trivial(self) -> bool:
        return not any(self.bits())

    def __mul__(self, other: LocalSquareClass) -> LocalSquareClass:
        if other.place != self.place:
            raise ValueError(f"classes live at different places {self.place} {other.place}")
        return LocalSquareClass.from_bits(self.place, [a ^ b for a, b in zip(self.bits(), other.bits())])

    def __str__(self) -> str:
        return str(self.rep)


def local_square_class(x: Rational, place: Place) -> LocalSquareClass:
    num, den = num_den(x)
    if num == 0:
        raise ValueError("zero has no square class")
    n: int = num * den
    if place.is_real:
        return LocalSquareClass(place, 1 if n > 0 else -1, 0)
    ell: int = place.prime
    v: int = int(multiplicity(ell, abs(n)))
    u: int = n // ell**v
    if ell == 2:
        return LocalSquareClass(place, _UNIT2_CLASS[u % 8], v % 2)
    return LocalSquareClass(place, 1 if legendre(u, ell) == 1 else nonresidue(ell), v % 2)


def local_coordinates(x: Rational, place: Place, basis: Sequence[Rational]) -> Optional[Tuple[int, ...]]:
    """exponents of x over a non-canonical local basis (e.g. <-1, p> at p = 3 mod 4), None if outside its span"""
    target: LocalSquareClass = local_square_class(x, place)
    classes: List[LocalSquareClass] = [local_square_class(b, place) for b in basis]
    for exps in itertools.product((0, 1), repeat=len(classes)):
        acc: LocalSquareClass = LocalSquareClass.from_bits(place, [0] * place.n_bits())
        for e, c in zip(exps, classes):
            if e:
                acc = acc * c
        if acc == target:
            return exps
    return None


def unit_basis_change(place: Place, u: int) -> Dict[int, Tuple[int, ...]]:
    """canonical representative -> exponents over <ell, u> for another nonresidue u at an odd place"""
    if place.is_real or place.prime == 2:
        raise ValueError(f"{place} has no choice of nonresidue")
    if legendre(u, place.prime) != -1:
        raise ValueError(f"{u=} is not a nonresidue mod {place.prime}")
    ret: Dict[int, Tuple[int, ...]] = {}
    for rep in place.canonical_reps():
        exps: Optional[Tuple[int, ...]] = local_coordinates(rep, place, [place.prime, u])
        assert exps is not None
        ret[rep] = exps
    return ret


def _integral_rep(x: Rational) -> int:
    num, den = num_den(x)
    if num == 0:
        raise ValueError("zero has no square class")
    return num * den


def hilbert_symbol(a: Rational, b: Rational, place: Place) -> int:
    """closed formulas: real sign rule, odd ell valuation/residue rule, ell=2 mod-8 rule"""
    ai: int = _integral_rep(a)
    bi: int = _integral_rep(b)
    if place.is_real:
        return -1 if ai < 0 and bi < 0 else 1
    ell: int = place.prime
    alpha: int = int(multiplicity(ell, abs(ai)))
    beta: int = int(multiplicity(ell, abs(bi)))
    u: int = ai // ell**alpha
    w: int = bi // ell**beta
    if ell == 2:
        u8, w8 = u % 8, w % 8

        def eps(t: int) -> int:
            return ((t - 1) // 2) % 2

        def omega(t: int) -> int:
            return ((t * t - 1) // 8) % 2

        exponent: int = eps(u8) * eps(w8) + alpha * omega(w8) + beta * omega(u8)
        return -1 if exponent % 2 else 1
    sign: int = -1 if (alpha * beta * ((ell - 1) // 2)) % 2 else 1
    if beta % 2:
        sign *= legendre(u, ell)
    if alpha % 2:
        sign *= legendre(w, ell)
    return sign


def hilbert_symbol_by_search(a: Rational, b: Rational, place: Place) -> int:
    """oracle: a is a local norm from Q_v(sqrt b) iff its class lies in the group generated by small values x^2-by^2"""
    ai: int = _integral_rep(a)
    bi: int = _integral_rep(b)
    bound: int = 16 if place.is_real else max(16, 2 * place.prime + 1)
    found: Set[Tuple[int, ...]] = set()
    for x in range(bound):
        for y in range(bound):
            value: int = x * x - bi * y * y
            if value != 0:
                found.add(local_square_class(value, place).bits())
    group: Set[Tuple[int, ...]] = {tuple([0] * place.n_bits())}
    for bits in found:
        group |= {tuple(g ^ h for g, h in zip(bits, member)) for member in group}
    return 1 if local_square_class(ai, place).bits() in group else -1


def hensel_sqrt(a: int, ell: int, precision: int, near: Optional[int] = None) -> Optional[int]:
    """r with r^2 = a mod ell^precision approximating a true ell-adic root; `near` picks the branch
    (root congruent to near mod ell, or mod 4 when ell=2)"""
    if precision < 1:
        raise ValueError(f"{precision=} must be positive")
    if a == 0:
        return None
    v: int = int(multiplicity(ell, abs(a)))
    if v % 2:
        return None
    unit: int = a // ell**v
    if ell == 2:
        if unit % 8 != 1:
            return None
    elif legendre(unit, ell) != 1:
        return None
    half: int = v // 2
    unit_precision: int = max(precision - v, 1)
    # one extra bit at 2: roots mod 2^(k+1) reduce to true 2-adic roots mod 2^k
    modulus: int = ell ** (unit_precision + (1 if ell == 2 else 0))
    roots: List[int] = sorted(int(r) for r in sqrt_mod(unit % modulus, modulus, all_roots=True))
    if near is not None:
        branch_mod: int = 4 if ell == 2 else ell
        roots = [r for r in roots if (r - near) % branch_mod == 0] or roots
    root: int = roots[0] % ell**unit_precision
    return (ell**half * root) % ell**precision


def prime_iter(bound: int) -> Iterator[int]:
    if bound < 2:
        logger.debug(f"empty prime stream for {bound=}")
        return
    yield from (int(p) for p in primerange(2, bound + 1))

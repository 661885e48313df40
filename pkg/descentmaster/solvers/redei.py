from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

from loguru import logger
from sympy import primefactors
from sympy.ntheory import isprime, sqrt_mod

from descentmaster.datastructures.models_and_schemas import SplittingType
from descentmaster.solvers.curvemodels import (
    RedeiUndefinedException,
    UnsupportedConfigurationException,
    UnsupportedShapeException,
)
from descentmaster.solvers.quadfield import (
    KSquareClass,
    QuadField,
    embed,
    minimally_ramified_generator,
    places_over,
    splitting_type,
)
from descentmaster.solvers.squareclasses import LocalSquareClass, Place, hilbert_symbol, legendre, squarefree_part


# middle argument -> z0 with governing quartic (x^2 - z0)^2 = -1
_GOVERNED: Dict[int, int] = {10: 3, 2: 1}


class RedeiTriple(NamedTuple):
    a: int
    b: int
    c: int

    @staticmethod
    def of(a: int, b: int, c: int) -> RedeiTriple:
        return RedeiTriple(*(int(squarefree_part(v)) for v in (a, b, c)))

    def permutations(self) -> List[RedeiTriple]:
        return [RedeiTriple(*perm) for perm in itertools.permutations(self)]

    def __str__(self) -> str:
        return f"[{self.a},{self.b},{self.c}]"


def _places(*values: int) -> List[Place]:
    primes = set()
    for v in values:
        primes |= {int(p) for p in primefactors(abs(v))}
    return [Place.real(), Place(2)] + [Place(p) for p in sorted(primes - {2})]


def redei_defined(t: RedeiTriple) -> bool:
    """all pairwise Hilbert symbols trivial everywhere"""
    places: List[Place] = _places(*t)
    for x, y in ((t.a, t.b), (t.a, t.c), (t.b, t.c)):
        if any(hilbert_symbol(x, y, v) != 1 for v in places):
            return False
    return True


def governing_quartic_roots(shape: int, p: int) -> int:
    """number of roots mod p of x^4 - 6x^2 + 10 (shape 10) or x^4 - 2x^2 + 2 (shape 2)"""
    if shape not in _GOVERNED:
        raise UnsupportedShapeException(f"no governing quartic for middle argument {shape}")
    if p in (2, 5) or not isprime(p):
        raise ValueError(f"{p=} must be a prime different from 2 and 5")
    if legendre(-1, p) != 1:
        return 0  # the roots x^2 = z0 +- i need i in F_p
    i: int = int(sqrt_mod(-1, p))
    z0: int = _GOVERNED[shape]
    count: int = 0
    for z in (z0 + i, z0 - i):
        symbol: int = legendre(z, p)
        count += 2 if symbol == 1 else (1 if symbol == 0 else 0)
    return count


def _governed_prime(b: int, ell: int) -> int:
    if b == 5:
        return _governed_prime(10, ell) * _governed_prime(2, ell)
    if not redei_defined(RedeiTriple(-1, b, ell)):
        raise RedeiUndefinedException(f"[-1,{b},{ell}] is not defined")
    roots: int = governing_quartic_roots(b, ell)
    if roots not in (0, 4):
        raise UnsupportedShapeException(f"governing quartic of [-1,{b},{ell}] has {roots} roots")
    return 1 if roots == 4 else -1


def _governed_split(t: RedeiTriple) -> Optional[Tuple[int, int]]:
    """(b, c) with {a, b, c} = {-1, b, c}, b in {2, 5, 10} and c odd positive"""
    if -1 not in t:
        return None
    rest: List[int] = list(t)
    rest.remove(-1)
    for b, c in ((rest[0], rest[1]), (rest[1], rest[0])):
        if b in (2, 5, 10) and c > 1 and c % 2 and c % 5:
            return b, c
    return None


def redei_governed(t: RedeiTriple) -> int:
    split = _governed_split(t)
    if split is None:
        raise UnsupportedShapeException(f"{t} has no governing quartic")
    b, c = split
    value: int = 1
    for ell in primefactors(c):
        value *= _governed_prime(b, int(ell))
    return value


def _general_setup(t: RedeiTriple) -> Optional[Tuple[QuadField, int, int]]:
    """(K = Q(sqrt a), b, c) for a permutation with a = 1 mod 8, c prime splitting in K"""
    for a, b, c in itertools.permutations(t):
        if a <= 1 or a % 8 != 1 or not isprime(c) or b % c == 0:
            continue
        K: QuadField = QuadField(a)
        if splitting_type(K, c) == SplittingType.SPLIT:
            return K, b, c
    return None


def _unramified(cls: LocalSquareClass) -> bool:
    if cls.val_parity:
        return False
    return cls.place.prime != 2 or cls.unit_part in (1, -3)


def redei_general(t: RedeiTriple) -> int:
    """Frobenius of a prime over c in K(sqrt(alpha))/K, K = Q(sqrt a), N(alpha) = b, alpha minimally ramified"""
    setup = _general_setup(t)
    if setup is None:
        raise UnsupportedShapeException(f"{t}: no argument order fits the norm construction")
    K, b, c = setup
    alpha: Optional[KSquareClass] = minimally_ramified_generator(K, b)
    if alpha is None:
        raise RedeiUndefinedException(f"{b} is not a norm from {K}")
    values: List[int] = []
    for place in places_over(K, c):
        cls: LocalSquareClass = embed(alpha.rep, place)
        if _unramified(cls):
            values.append(1 if cls.is_trivial() else -1)
    if not values:
        raise UnsupportedShapeException(f"{K}(sqrt({alpha})) ramifies at every place over {c}")
    if len(set(values)) != 1:
        raise UnsupportedConfigurationException(f"Frobenius over {c} depends on the place: {values}")
    logger.debug(f"{t} via {K} alpha={alpha} at {c}: {values[0]}")
    return values[0]


def redei_symbol(t: RedeiTriple, method: str = "auto") -> int:
    t = RedeiTriple.of(*t)
    if 1 in t:
        return 1
    if not redei_defined(t):
        raise RedeiUndefinedException(f"{t} is not defined")
    if method == "governed":
        return redei_governed(t)
    if method == "general":
        return redei_general(t)
    if method != "auto":
        raise ValueError(f"unknown {method=}")
    if _governed_split(t) is not None:
        return redei_governed(t)
    return redei_general(t)


@dataclass
class ReciprocityResult:
    triple: RedeiTriple
    agree: bool
    values: Dict[str, int] = field(default_factory=dict)
    skipped: Dict[str, str] = field(default_factory=dict)

    def reprJSON(self) -> dict:
        return {"triple": list(self.triple), "agree": self.agree, "values": self.values, "skipped": self.skipped}


def redei_reciprocity_check(a: int, b: int, c: int) -> ReciprocityResult:
    """evaluates every argument order along every supported path; agree iff all evaluations coincide"""
    triple: RedeiTriple = RedeiTriple.of(a, b, c)
    result: ReciprocityResult = ReciprocityResult(triple=triple, agree=True)
    for perm in triple.permutations():
        for method in ("governed", "general"):
            key: str = f"{perm}:{method}"
            try:
                result.values[key] = redei_symbol(perm, method=method)
            except (UnsupportedShapeException, UnsupportedConfigurationException, RedeiUndefinedException) as ex:
                result.skipped[key] = str(ex)
    result.agree = len(set(result.values.values())) <= 1
    return result

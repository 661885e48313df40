from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import List, Set

from descentmaster.datastructures.models_and_schemas import SplittingType
from descentmaster.solvers.curvemodels import UnsupportedCompletionException, UnsupportedConfigurationException
from descentmaster.solvers.quadfield import (
    KSquareClass,
    PlaceOfK,
    QuadField,
    QuadFieldElem,
    K_S_group,
    class_group_2_rank,
    embed,
    fundamental_unit,
    hilbert_symbol_K,
    is_square_in_K,
    minimally_ramified_generator,
    norm_locally_solvable,
    places_over,
    rational_class_of,
    real_places,
    reduce_rep,
    solve_norm_equation,
    splitting_type,
    twisting_subgroup,
)
from descentmaster.solvers.squareclasses import squarefree_part

import pytest


def test_field_discriminants() -> None:
    assert QuadField(241).disc == 241
    assert QuadField(2).disc == 8
    assert QuadField(3).disc == 12
    assert QuadField(-1).disc == -4
    assert QuadField(1921).disc_primes() == [17, 113]


def test_element_arithmetic() -> None:
    K = QuadField(2)
    x = K.element(1, 1)
    assert (x * x.conj()).norm() == 1
    assert x.norm() == -1
    assert (x * x) == K.element(3, 2)
    assert (x / x) == K.element(1)
    assert x**3 == K.element(7, 5)
    assert K.element(Fraction(1, 2), Fraction(3, 2)) == QuadFieldElem(2, 1, 3, 2)
    with pytest.raises(ZeroDivisionError):
        K.element(1, 1, 0)


def test_real_signs() -> None:
    x = QuadField(17).element(4, 1)
    assert x.real_sign(0) == 1
    assert x.real_sign(1) == -1
    assert QuadField(17).element(-5, 1).real_sign(0) == -1
    assert QuadField(17).element(-3).real_sign(1) == -1


def test_fundamental_units() -> None:
    assert fundamental_unit(QuadField(2)) == QuadField(2).element(1, 1)
    assert fundamental_unit(QuadField(3)) == QuadField(3).element(2, 1)
    assert fundamental_unit(QuadField(5)) == QuadFieldElem(5, 1, 1, 2)
    assert fundamental_unit(QuadField(17)).norm() == -1
    assert fundamental_unit(QuadField(241)).norm() == -1
    with pytest.raises(UnsupportedConfigurationException):
        fundamental_unit(QuadField(-5))


def test_splitting_types() -> None:
    K = QuadField(17)
    assert splitting_type(K, 2) == SplittingType.SPLIT
    assert splitting_type(K, 3) == SplittingType.INERT
    assert splitting_type(K, 13) == SplittingType.SPLIT
    assert splitting_type(K, 17) == SplittingType.RAMIFIED
    assert len(places_over(K, 2)) == 2
    assert len(places_over(K, 3)) == 1
    assert real_places(K) == [PlaceOfK(0, 0), PlaceOfK(0, 1)]


def test_squares_in_K() -> None:
    K = QuadField(2)
    assert is_square_in_K(K.element(3, 2))
    assert is_square_in_K(K.element(2))
    assert is_square_in_K(K.element(18))
    assert not is_square_in_K(K.element(3))
    assert not is_square_in_K(K.element(1, 1))


def test_reduce_rep_keeps_class() -> None:
    K = QuadField(17)
    x = K.element(Fraction(8, 3), Fraction(2, 3))
    rep = reduce_rep(x)
    assert rep.c == 1
    assert is_square_in_K(x / rep)
    assert KSquareClass.of(x).equivalent(KSquareClass.of(K.element(24, 6)))


def test_embeddings_of_rationals_and_conjugates() -> None:
    K = QuadField(17)
    for place in places_over(K, 2) + places_over(K, 13):
        assert embed(K.element(3), place).rep == embed(K.element(3), place.conjugate()).rep
        x = K.element(4, 1)
        assert embed(x.conj(), place.conjugate()).bits() == embed(x, place).bits()
    assert embed(K.element(3), PlaceOfK(2, 0)).rep == 3
    assert embed(K.element(4, 1), PlaceOfK(0, 1)).rep == -1


def test_hilbert_symbols_over_K_satisfy_the_product_formula() -> None:
    K = QuadField(17)
    # supported on the places over 2, 13 and 19, all split
    elements = [K.element(-1), K.element(2), K.element(13), K.element(19)]
    elements += [K.element(a, 1) for a in (4, 5, 6, 1, 7, 3)]
    places = real_places(K) + [pl for ell in (2, 13, 19) for pl in places_over(K, ell)]
    assert len(places) == 8
    for x in elements:
        for y in elements:
            product = 1
            for pl in places:
                product *= hilbert_symbol_K(x, y, pl)
            assert product == 1, (str(x), str(y))
    assert [hilbert_symbol_K(K.element(-1), K.element(-1), pl) for pl in real_places(K)] == [-1, -1]
    # 4 + sqrt(17) is positive at the first real place only
    assert [hilbert_symbol_K(K.element(4, 1), K.element(-1), pl) for pl in real_places(K)] == [1, -1]


def test_embed_rejects_nonsplit_primes() -> None:
    with pytest.raises(UnsupportedCompletionException):
        embed(QuadField(17).element(1, 1), PlaceOfK(3, 0))


def test_local_norm_solvability() -> None:
    assert norm_locally_solvable(17, -1)
    assert norm_locally_solvable(17, 2)
    assert not norm_locally_solvable(17, 3)
    assert not norm_locally_solvable(3, -1)


def test_norm_equation_solutions() -> None:
    K = QuadField(17)
    for d in (-1, 2, -2, 13):
        x = solve_norm_equation(K, d)
        assert x is not None
        assert squarefree_part(x.norm()) == d
    assert solve_norm_equation(K, 3) is None
    # 5 + sqrt(17) has norm 8
    assert squarefree_part(K.element(5, 1).norm()) == 2


def test_class_group_two_ranks() -> None:
    assert class_group_2_rank(QuadField(-5)) == 1
    assert class_group_2_rank(QuadField(241)) == 0
    assert class_group_2_rank(QuadField(1921)) == 1
    assert class_group_2_rank(QuadField(3)) == 0


def test_minimally_ramified_generators_have_the_norm() -> None:
    K = QuadField(241)
    for d in (-1, 2, 3, 5):
        gen = minimally_ramified_generator(K, d)
        assert gen is not None
        assert gen.norm_class() == d
    assert minimally_ramified_generator(K, 7) is None


def test_rational_class_of_square_norm_elements() -> None:
    K = QuadField(17)
    assert rational_class_of(K.element(6)) == 6
    w = K.element(4, 1) / K.element(4, -1)  # norm 1
    assert is_square_in_K(w * rational_class_of(w))


def test_ks_group_dimensions() -> None:
    ks = K_S_group(QuadField(241), [2, 3, 5])
    assert ks.dimension == 8 == ks.expected_dimension
    for b in ks.basis:
        assert ks.contains(b.rep)
    ks_pq = K_S_group(QuadField(17 * 113), [2])
    assert ks_pq.dimension == 5


def test_ks_group_coordinates_of_basis_are_unit_vectors() -> None:
    ks = K_S_group(QuadField(241), [2, 3, 5])
    for i, b in enumerate(ks.basis):
        coords = ks.coordinates(b.rep)
        assert [int(c) for c in coords] == [1 if j == i else 0 for j in range(ks.dimension)]
    assert not ks.contains(QuadField(241).element(7))


def _span(gens: List[int]) -> Set[int]:
    ret: Set[int] = set()
    for k in range(len(gens) + 1):
        for subset in combinations(gens, k):
            prod = 1
            for g in subset:
                prod *= g
            ret.add(int(squarefree_part(prod)))
    return ret


@pytest.mark.parametrize(
    "m,d,table",
    [
        (241, -1, [-1, 241]),
        (241, 2, [2, 241]),
        (241, 3, [-1, -3, 241]),
        (241, 5, [5, 241]),
        (17 * 113, -1, [-1, 17, 113]),
        (17 * 113, 2, [2, 17, 113]),
    ],
)
def test_twisting_subgroups(m: int, d: int, table: List[int]) -> None:
    gens = twisting_subgroup(QuadField(m), d)
    assert _span(gens) == _span(table)
    assert len(_span(gens)) == 2 ** len(table)

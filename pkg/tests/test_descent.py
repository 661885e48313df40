from __future__ import annotations

import random
from typing import Dict, List, Set, Tuple

from sympy import primerange

from descentmaster.solvers import descent
from descentmaster.solvers.curvemodels import (
    CurveModel,
    CurvePoint,
    F2Subspace,
    InconsistencyException,
    KummerTriple,
    LocalKummerTriple,
    NotOnCurveException,
    add_points,
    double_point,
)
from descentmaster.solvers.descent import (
    bad_primes,
    halve_point,
    independent_points,
    kummer_image,
    local_image,
    local_selmer_dim,
    nontorsion_points,
    point_search,
    rank_lower_bound,
    root_number_by_congruence,
    root_number_imag_quad,
    search_witnesses,
    selmer_contains,
    selmer_Q,
    selmer_rank_bound,
    torsion_subgroup,
    two_torsion_points,
)
from descentmaster.solvers.gf2 import gf2_rank, gf2_same_span, to_gf2
from descentmaster.solvers.squareclasses import Place, squarefree_part

import pytest

from tests.tabledata import (
    local_images_2,
    local_images_3,
    local_images_5,
    local_images_real,
    order_four_points,
    p_regime_primes,
    pq_regime_primes,
    witnesses_minus_17,
)


LOCAL_TABLES: List[Tuple[Place, Dict[int, List[Tuple[int, int, int]]]]] = [
    (Place(2), local_images_2),
    (Place(3), local_images_3),
    (Place(5), local_images_5),
    (Place.real(), local_images_real),
]


def _cases() -> List[Tuple[Place, int, List[Tuple[int, int, int]]]]:
    return [(place, d, basis) for place, table in LOCAL_TABLES for d, basis in table.items()]


@pytest.mark.parametrize("place,d,expected", _cases(), ids=lambda v: str(v) if not isinstance(v, list) else "")
def test_local_images_match_table(place: Place, d: int, expected: List[Tuple[int, int, int]]) -> None:
    image: F2Subspace[LocalKummerTriple] = local_image(CurveModel.x015(d), place)
    assert image.dimension == local_selmer_dim(CurveModel.x015(d), place)
    table_rows = to_gf2([LocalKummerTriple.of(place, *t).bits() for t in expected])
    assert gf2_same_span(image.matrix, table_rows), [str(b) for b in image.basis]


def test_local_image_depends_on_local_class_of_d_only() -> None:
    # -7 = 1 mod 8 and 41 = 1 mod 8
    assert gf2_same_span(local_image(CurveModel.x015(-7), Place(2)).matrix, local_image(CurveModel.x015(41), Place(2)).matrix)
    # 11 = -1 mod 3
    assert gf2_same_span(local_image(CurveModel.x015(11), Place(3)).matrix, local_image(CurveModel.x015(-1), Place(3)).matrix)


def test_local_selmer_dims() -> None:
    curve = CurveModel.x015()
    assert local_selmer_dim(curve, Place(2)) == 3
    assert local_selmer_dim(curve, Place(2), degree=2) == 4
    assert local_selmer_dim(curve, Place(7)) == 2
    assert local_selmer_dim(curve, Place.real()) == 1
    assert local_selmer_dim(curve, Place.real(), degree=2) == 0


def test_kummer_images_of_points(x015: CurveModel) -> None:
    assert kummer_image(x015, CurvePoint.of(32, 180)) == KummerTriple.of(5, 1, 5)
    assert kummer_image(x015, CurvePoint.of(-8, 20)) == KummerTriple.of(5, -1, -5)
    assert kummer_image(CurveModel.x015(-1), CurvePoint.of(-28, 120)) == KummerTriple.of(15, 6, 10)
    assert kummer_image(x015, CurvePoint.at_infinity()).is_trivial()
    with pytest.raises(NotOnCurveException):
        kummer_image(x015, CurvePoint.of(1, 1))


@pytest.mark.parametrize("d", [1, -1, 2, -17, 241])
def test_kummer_images_of_two_torsion(d: int) -> None:
    curve = CurveModel.x015(d)
    images = [kummer_image(curve, t) for t in two_torsion_points(curve)]
    assert images == [KummerTriple.of(1, -d, -d), KummerTriple.of(d, -1, -d), KummerTriple.of(d, d, 1)]


def test_witness_images(curve_minus_17: CurveModel) -> None:
    for x, y, image in witnesses_minus_17:
        assert kummer_image(curve_minus_17, CurvePoint.of(x, y)) == KummerTriple.of(*image)


def test_torsion_of_x015(x015: CurveModel) -> None:
    tors = torsion_subgroup(x015)
    assert tors.structure == "Z/4xZ/2"
    assert tors.order == 8
    fours: Set[Tuple] = {(p.x, p.y) for p in tors.points_of_order(x015, 4)}
    assert fours == set(order_four_points[1])


def test_torsion_of_minus_one_twist() -> None:
    curve = CurveModel.x015(-1)
    tors = torsion_subgroup(curve)
    assert tors.structure == "Z/4xZ/2"
    assert {(p.x, p.y) for p in tors.points_of_order(curve, 4)} == set(order_four_points[-1])


@pytest.mark.parametrize("d", [7, -17, 241])
def test_generic_twists_have_two_torsion_only(d: int) -> None:
    tors = torsion_subgroup(CurveModel.x015(d))
    assert tors.structure == "Z/2xZ/2"
    assert tors.order == 4


def test_halving_two_torsion(x015: CurveModel) -> None:
    halves = halve_point(x015, CurvePoint.of(12, 0))
    assert {(p.x, p.y) for p in halves} == set(order_four_points[1])
    for q in halves:
        assert double_point(x015, q) == CurvePoint.of(12, 0)
    # image (1, -1, -1) is nontrivial
    assert halve_point(x015, CurvePoint.of(-13, 0)) == []
    halves_minus_one = halve_point(CurveModel.x015(-1), CurvePoint.of(-13, 0))
    assert {(p.x, p.y) for p in halves_minus_one} == set(order_four_points[-1])


def test_bad_primes() -> None:
    assert bad_primes(CurveModel.x015()) == [2, 3, 5]
    assert bad_primes(CurveModel.x015(-17)) == [2, 3, 5, 17]
    assert bad_primes(CurveModel.x015(15)) == [2, 3, 5]


@pytest.mark.parametrize("d", [1, -1, -2, -3, -5])
def test_selmer_of_small_twists_is_torsion(d: int) -> None:
    selmer = selmer_Q(CurveModel.x015(d))
    assert selmer.dimension == 2
    # for d = +-1 two of the three 2-torsion images coincide, the order-4 points fill the gap
    assert selmer.labels.count("torsion") == (1 if d in (1, -1) else 2)


def test_selmer_of_minus_17(curve_minus_17: CurveModel, selmer_minus_17: F2Subspace[KummerTriple]) -> None:
    assert selmer_minus_17.dimension == 4
    assert selmer_minus_17.labels.count("torsion") == 2
    assert selmer_rank_bound(curve_minus_17, selmer_minus_17) == 2
    for _, _, image in witnesses_minus_17:
        assert selmer_contains(selmer_minus_17, KummerTriple.of(*image), curve_minus_17)
    assert not selmer_contains(selmer_minus_17, KummerTriple.of(-1, 1, -1), curve_minus_17)
    # 7 is outside S
    assert not selmer_contains(selmer_minus_17, KummerTriple.of(7, 7, 1), curve_minus_17)


@pytest.mark.parametrize("p", [p_regime_primes[0], p_regime_primes[1], pq_regime_primes[1], pq_regime_primes[2]])
def test_selmer_of_minus_p_for_p_1_mod_8(p: int) -> None:
    curve = CurveModel.x015(-p)
    selmer = selmer_Q(curve)
    assert selmer.dimension == 4
    assert selmer_contains(selmer, KummerTriple.of(-1, -1, 1), curve)
    if p % 15 in (1, 4):
        assert selmer_contains(selmer, KummerTriple.of(15, 6, 10), curve)


@pytest.mark.parametrize("p", [19, 23, 31, 47])
def test_selmer_of_minus_p_otherwise(p: int) -> None:
    assert selmer_Q(CurveModel.x015(-p)).dimension == 2


@pytest.mark.slow
def test_selmer_of_minus_p_below_10000() -> None:
    for p in primerange(7, 10_000):
        if p % 15 not in (1, 2, 4, 8):
            continue
        curve = CurveModel.x015(-p)
        selmer = selmer_Q(curve)
        if p % 8 != 1:
            assert selmer.dimension == 2, p
            continue
        assert selmer.dimension == 4, p
        assert selmer_contains(selmer, KummerTriple.of(-1, -1, 1), curve), p
        if p % 15 in (1, 4):
            assert selmer_contains(selmer, KummerTriple.of(15, 6, 10), curve), p


@pytest.mark.parametrize("n,expected", [(1, 2), (3, 2), (5, 3), (7, 3)])
def test_selmer_of_congruent_number_curves(n: int, expected: int) -> None:
    # n*y^2 = x^3 - x
    assert selmer_Q(CurveModel(-1, 0, 1, d=n)).dimension == expected


def test_point_search_on_x015_finds_torsion_only(x015: CurveModel) -> None:
    found = point_search(x015, 1000)
    affine_torsion = [p for p in torsion_subgroup(x015).points if not p.infinity]
    assert set(found) == set(affine_torsion)
    with pytest.raises(ValueError):
        point_search(x015, 0)


def test_point_search_finds_the_minus_17_points(curve_minus_17: CurveModel) -> None:
    found = point_search(curve_minus_17)
    assert {(x, y) for x, y, _ in witnesses_minus_17} <= {(p.x, p.y) for p in found}
    tors_images = [KummerTriple.trivial()] + [kummer_image(curve_minus_17, t) for t in two_torsion_points(curve_minus_17)]
    # (-1, -1, 1) is hit modulo torsion
    assert any(
        kummer_image(curve_minus_17, p) * t == KummerTriple.of(-1, -1, 1)
        for p in nontorsion_points(curve_minus_17, found)
        for t in tors_images
    )


def test_rank_lower_bound_from_searched_witnesses(
    curve_minus_17: CurveModel, selmer_minus_17: F2Subspace[KummerTriple]
) -> None:
    found = point_search(curve_minus_17)
    witnesses = independent_points(curve_minus_17, found)
    assert len(witnesses) == 2
    assert search_witnesses(curve_minus_17) == witnesses
    for p in witnesses:
        assert curve_minus_17.contains(p)
        assert selmer_contains(selmer_minus_17, kummer_image(curve_minus_17, p), curve_minus_17)
    assert rank_lower_bound(curve_minus_17, witnesses) == 2
    assert rank_lower_bound(curve_minus_17, witnesses[:1]) == 1
    assert rank_lower_bound(curve_minus_17, found) == 2
    assert len(nontorsion_points(curve_minus_17, witnesses + two_torsion_points(curve_minus_17))) == 2


def test_no_witnesses_on_x015(x015: CurveModel) -> None:
    assert search_witnesses(x015, 1000) == []
    assert independent_points(x015, two_torsion_points(x015)) == []


def test_selmer_raises_when_torsion_images_leave_the_kernel(
    curve_minus_17: CurveModel, monkeypatch: pytest.MonkeyPatch
) -> None:
    selmer_Q(curve_minus_17)  # local images cached before kummer_image is replaced
    monkeypatch.setattr(descent, "kummer_image", lambda curve, pt: KummerTriple.of(-1, 1, -1))
    with pytest.raises(InconsistencyException):
        selmer_Q(curve_minus_17)


def test_kummer_map_is_a_homomorphism(curve_minus_17: CurveModel) -> None:
    p1, p2 = [CurvePoint.of(x, y) for x, y, _ in witnesses_minus_17]

    def image(pt: CurvePoint) -> KummerTriple:
        return kummer_image(curve_minus_17, pt)

    assert image(add_points(curve_minus_17, p1, p2)) == image(p1) * image(p2)
    assert image(double_point(curve_minus_17, p1)).is_trivial()
    for t in two_torsion_points(curve_minus_17):
        assert image(add_points(curve_minus_17, p1, t)) == image(p1) * image(t)
    t1, t2, t3 = two_torsion_points(curve_minus_17)
    assert add_points(curve_minus_17, t1, t2) == t3
    assert image(t1) * image(t2) == image(t3)


@pytest.mark.parametrize("d", [d for d in range(-40, 41) if d != 0 and squarefree_part(d) == d])
def test_torsion_images_dependent_only_for_d_plus_minus_one(d: int) -> None:
    curve = CurveModel.x015(d)
    images = [kummer_image(curve, t) for t in two_torsion_points(curve)]
    primes = sorted({q for t in images for q in t.primes()})
    rank = gf2_rank(to_gf2([t.vector(primes) for t in images], n_cols=2 * (len(primes) + 1)))
    assert rank == (1 if d in (1, -1) else 2)


@pytest.mark.parametrize("d,order", [(-1, (2, 0, 1)), (7, (1, 0, 2))])
def test_selmer_independent_of_root_order(d: int, order: Tuple[int, int, int]) -> None:
    curve = CurveModel.x015(d)
    selmer = selmer_Q(curve)
    permuted = curve.permuted(order)
    selmer_p = selmer_Q(permuted)
    assert selmer_p.dimension == selmer.dimension
    for t in selmer.basis:
        c = t.as_tuple()
        assert selmer_contains(selmer_p, KummerTriple.of(c[order[0]], c[order[1]], c[order[2]]), permuted)


@pytest.mark.slow
def test_selmer_of_minus_17_independent_of_root_order(selmer_minus_17: F2Subspace[KummerTriple]) -> None:
    order = (1, 2, 0)
    permuted = CurveModel.x015(-17).permuted(order)
    selmer_p = selmer_Q(permuted)
    assert selmer_p.dimension == 4
    for t in selmer_minus_17.basis:
        c = t.as_tuple()
        assert selmer_contains(selmer_p, KummerTriple.of(c[order[0]], c[order[1]], c[order[2]]), permuted)


@pytest.mark.parametrize("ell", [2, 3, 5, 7, 11, 13])
def test_local_image_dimension_on_random_twists(ell: int) -> None:
    rng = random.Random(ell)
    twists = [d for d in (rng.randint(-5000, 5000) for _ in range(80)) if d != 0 and squarefree_part(d) == d]
    assert len(twists) >= 20
    for d in twists[:20]:
        curve = CurveModel.x015(d)
        assert local_image(curve, Place(ell)).dimension == local_selmer_dim(curve, Place(ell)), d
        if ell > 2:
            assert local_selmer_dim(curve, Place(ell)) == 2


def test_root_number_matches_congruence() -> None:
    for d in range(1, 3000):
        if squarefree_part(d) != d:
            continue
        assert root_number_imag_quad(d) == root_number_by_congruence(d), d
    with pytest.raises(ValueError):
        root_number_imag_quad(12)
    with pytest.raises(ValueError):
        root_number_imag_quad(-7)

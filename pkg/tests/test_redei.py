from __future__ import annotations

from typing import Dict, List

from sympy import primerange

from descentmaster.solvers.curvemodels import RedeiUndefinedException, UnsupportedShapeException
from descentmaster.solvers.redei import (
    RedeiTriple,
    governing_quartic_roots,
    redei_defined,
    redei_reciprocity_check,
    redei_symbol,
)

import pytest

from tests.tabledata import p_regime_primes, pq_regime_primes


def test_triple_normalizes_to_square_classes() -> None:
    assert RedeiTriple.of(-4, 8, 17 * 9) == RedeiTriple(-1, 2, 17)
    assert str(RedeiTriple(-1, 2, 17)) == "[-1,2,17]"
    assert len(RedeiTriple(-1, 2, 17).permutations()) == 6


def test_defined_triples() -> None:
    assert redei_defined(RedeiTriple(-1, 2, 17))
    assert redei_defined(RedeiTriple(-1, 10, 241))
    # (2, 3)_3 = -1
    assert not redei_defined(RedeiTriple(-1, 2, 3))
    # 41 = 1 mod 8
    assert redei_defined(RedeiTriple(-1, 2, 41))


def test_known_symbol_values() -> None:
    assert redei_symbol(RedeiTriple(-1, 2, 17)) == -1
    assert redei_symbol(RedeiTriple(-1, 10, 241)) == 1
    assert redei_symbol(RedeiTriple(-1, 2, 241)) == -1
    assert redei_symbol(RedeiTriple(-1, 5, 241)) == -1


def test_trivial_argument_gives_one() -> None:
    assert redei_symbol(RedeiTriple(1, 2, 3)) == 1
    assert redei_symbol(RedeiTriple(-1, 4, 17)) == 1


def test_undefined_triple_raises() -> None:
    with pytest.raises(RedeiUndefinedException):
        redei_symbol(RedeiTriple(-1, 2, 3))


def test_unknown_method() -> None:
    with pytest.raises(ValueError):
        redei_symbol(RedeiTriple(-1, 2, 17), method="quartic")


def test_governing_quartics() -> None:
    assert governing_quartic_roots(2, 17) == 0
    assert governing_quartic_roots(10, 241) == 4
    # no square root of -1 mod 3
    assert governing_quartic_roots(2, 3) == 0
    with pytest.raises(UnsupportedShapeException):
        governing_quartic_roots(3, 17)
    with pytest.raises(ValueError):
        governing_quartic_roots(2, 5)
    with pytest.raises(ValueError):
        governing_quartic_roots(2, 21)


def test_symbol_is_symmetric() -> None:
    for t in RedeiTriple(-1, 2, 241).permutations():
        assert redei_symbol(t) == -1


@pytest.mark.parametrize("p", p_regime_primes)
def test_trilinearity_in_the_middle_argument(p: int) -> None:
    assert redei_symbol(RedeiTriple(-1, 10, p)) == redei_symbol(RedeiTriple(-1, 2, p)) * redei_symbol(RedeiTriple(-1, 5, p))


def test_trilinearity_in_the_last_argument() -> None:
    q, r = pq_regime_primes[0], pq_regime_primes[1]
    assert redei_symbol(RedeiTriple(-1, 2, q * r)) == redei_symbol(RedeiTriple(-1, 2, q)) * redei_symbol(RedeiTriple(-1, 2, r))


def test_general_path_matches_governed_quartics() -> None:
    assert redei_symbol(RedeiTriple(17, -1, 2), method="general") == -1
    assert redei_symbol(RedeiTriple(241, -1, 2), method="general") == -1
    assert redei_symbol(RedeiTriple(241, -1, 5), method="general") == -1


def test_governed_path_needs_minus_one() -> None:
    with pytest.raises(UnsupportedShapeException):
        redei_symbol(RedeiTriple(2, 17, 2), method="governed")


def test_reciprocity_check() -> None:
    result = redei_reciprocity_check(-1, 2, 17)
    assert result.agree
    assert set(result.values.values()) == {-1}
    assert len(result.values) == 12
    assert not result.skipped
    result_241 = redei_reciprocity_check(-1, 5, 241)
    assert result_241.agree and set(result_241.values.values()) == {-1}


def test_governing_quartics_have_zero_or_four_roots() -> None:
    for p in primerange(7, 3000):
        if p % 8 == 1:
            assert governing_quartic_roots(2, p) in (0, 4), p
        if p % 40 in (1, 9):
            assert governing_quartic_roots(10, p) in (0, 4), p


_RECIPROCITY_SAMPLE: List[int] = [p for p in primerange(7, 10_000) if p % 40 in (1, 9)][::12]


@pytest.mark.slow
@pytest.mark.parametrize("p", _RECIPROCITY_SAMPLE)
def test_reciprocity_on_sampled_primes(p: int) -> None:
    values: Dict[int, int] = {}
    for b in (2, 5, 10):
        result = redei_reciprocity_check(-1, b, p)
        assert result.agree, (b, result.values)
        assert any(key.endswith(":general") for key in result.values), (b, result.skipped)
        values[b] = next(iter(result.values.values()))
    assert values[5] == values[2] * values[10]
    assert values[10] == (1 if governing_quartic_roots(10, p) == 4 else -1)

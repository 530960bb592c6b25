"""Cell measure weights: exact arithmetic, additivity, trace curves."""

from fractions import Fraction

import numpy as np
import pytest

from gasket.errors import ResourceLimitError
from gasket.graph import word_index
from gasket.kusuoka import kusuoka_weights, trace_curves


@pytest.mark.parametrize("m", range(0, 9))
def test_total_mass_exact(m):
    kw = kusuoka_weights(m)
    assert sum(kw.numerators) == kw.denominator
    assert kw.denominator == 2 * 135**m
    assert abs(kw.values.sum() - 1.0) <= 1e-12


@pytest.mark.parametrize("m", range(0, 7))
def test_parent_child_additivity_exact(m):
    parent = kusuoka_weights(m).numerators
    child = kusuoka_weights(m + 1).numerators
    for j, nw in enumerate(parent):
        assert 135 * nw == child[3 * j] + child[3 * j + 1] + child[3 * j + 2]


def test_level_one_weights_are_thirds():
    kw = kusuoka_weights(1)
    assert [kw.weight(w) for w in "123"] == [Fraction(1, 3)] * 3


def test_known_level_two_weight():
    assert kusuoka_weights(2).weight("11") == Fraction(41, 225)


def test_weight_matches_values_array():
    kw = kusuoka_weights(3)
    for w in ("111", "123", "333", "213"):
        assert float(kw.weight(w)) == pytest.approx(
            kw.values[word_index(w)], rel=1e-15)


def test_weights_positive_and_unequal():
    kw = kusuoka_weights(4)
    assert kw.values.min() > 0
    assert kw.values.max() > 2 * kw.values.min()


def test_empty_word_at_level_zero():
    kw = kusuoka_weights(0)
    assert kw.weight("") == 1


def test_trace_curves_serial_parallel_agree():
    a = trace_curves(5, workers=1)
    b = trace_curves(5, workers=4)
    assert np.allclose(a.max_curve, b.max_curve, rtol=0, atol=0)
    assert np.allclose(a.min_curve, b.min_curve, rtol=0, atol=0)
    assert a.argmax == b.argmax and a.argmin == b.argmin


def test_trace_curves_bracket_limits():
    tc = trace_curves(8)
    assert all(c > 0.35 for c in tc.max_curve[1:])
    assert tc.min_curve[-1] < tc.min_curve[3]
    assert len(tc.argmax[-1]) == 8


def test_trace_max_curve_decreasing_tail():
    tc = trace_curves(7)
    tail = tc.max_curve[4:]
    assert all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))


def test_level_cap():
    with pytest.raises(ResourceLimitError):
        kusuoka_weights(13)
    with pytest.raises(ResourceLimitError):
        trace_curves(14)

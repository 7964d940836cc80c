"""Tests for the bracketed lattice sums."""

import math

import pytest

from bolax.errors import SeriesError
from bolax.series import bracketed_sum


def test_basel_sum_within_bracket():
    result = bracketed_sum(lambda k: 1.0 / (k * k), terms=1000)
    assert result.terms == 1000
    assert abs(result.value - math.pi**2 / 6) <= result.tail_bound
    assert result.tail_bound == pytest.approx(0.5 * (1 / 1000 - 1 / 1001), rel=1e-6)


def test_adaptive_count_meets_tolerance():
    result = bracketed_sum(lambda k: 1.0 / (k * k), tol=1e-10)
    assert result.tail_bound < 1e-10
    assert abs(result.value - math.pi**2 / 6) < 1e-9


def test_coth_closed_form():
    # sum_{k>=1} 1/(1+k^2) = (pi coth pi - 1) / 2
    expected = (math.pi / math.tanh(math.pi) - 1) / 2
    result = bracketed_sum(lambda k: 1.0 / (1.0 + k * k), terms=4096)
    assert result.value == pytest.approx(expected, abs=1e-9)


def test_start_index_shifts_sum():
    full = bracketed_sum(lambda k: 1.0 / (k * k), terms=2000)
    shifted = bracketed_sum(lambda k: 1.0 / (k * k), start=2, terms=2000)
    assert full.value - shifted.value == pytest.approx(1.0, abs=1e-12)


def test_count_below_start_rejected():
    with pytest.raises(ValueError, match="start index"):
        bracketed_sum(lambda k: 1.0 / (k * k), start=10, terms=5)


def test_long_partial_sum_keeps_the_tail():
    # at K = 10^6 the tail is about 1e-6, far above the reported bound
    expected = (math.pi / math.tanh(math.pi) - 1) / 2
    result = bracketed_sum(lambda k: 1.0 / (1.0 + k * k), terms=10**6)
    assert 0 < result.tail_bound < 1e-12
    assert result.value == pytest.approx(expected, abs=1e-12)


def test_zeta_tail_at_large_count():
    result = bracketed_sum(lambda k: 1.0 / (k * k * (1.0 + k * k)), terms=10**6)
    expected = math.pi**2 / 6 - (math.pi / math.tanh(math.pi) - 1) / 2
    assert result.tail_bound >= 0
    assert result.value == pytest.approx(expected, abs=1e-13)


def test_negative_terms_rejected():
    with pytest.raises(SeriesError, match="not positive"):
        bracketed_sum(lambda k: -1.0 / (k * k), terms=100)

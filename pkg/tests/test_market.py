"""Testes da SMA e da inclinação pós-conclusão."""

from datetime import date, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.exceptions import InsufficientDataError
from app.models.schemas import StockObservation, StockSeries
from app.services.market import compute_sma, compute_sma_slope, ols_slope

START = date(2021, 3, 1)


def daily_series(closes, start=START, step=1):
    return StockSeries(
        ticker="ACME",
        observations=tuple(
            StockObservation(date=start + timedelta(days=step * i), close=c) for i, c in enumerate(closes)
        ),
    )


def test_sma_matches_closed_form():
    closes = [float(c) for c in (3, 1, 4, 1, 5, 9, 2, 6)]
    sma = compute_sma(daily_series(closes), window=3)
    assert len(sma) == len(closes) - 2
    for k, (day, value) in enumerate(sma):
        assert day == START + timedelta(days=k + 2)
        assert value == pytest.approx(sum(closes[k : k + 3]) / 3, abs=1e-9)


def test_sma_window_one_is_identity():
    closes = [10.0, 11.0, 12.5]
    assert [v for _, v in compute_sma(daily_series(closes), window=1)] == closes


def test_sma_short_series_raises():
    with pytest.raises(InsufficientDataError):
        compute_sma(daily_series([1.0, 2.0]), window=5)


def test_flat_series_has_zero_slope():
    series = daily_series([42.0] * 30)
    assert compute_sma_slope(series, START + timedelta(days=10)) == pytest.approx(0.0, abs=1e-12)


def test_linear_series_slope_is_one_per_day():
    series = daily_series([100.0 + i for i in range(30)])
    assert compute_sma_slope(series, START + timedelta(days=10)) == pytest.approx(1.0, abs=1e-9)


def test_slope_uses_calendar_days_with_gaps():
    # um ponto a cada dois dias, preço cresce 2 por ponto => 1 por dia corrido
    series = daily_series([float(2 * i) for i in range(30)], step=2)
    slope = compute_sma_slope(series, START + timedelta(days=20), sma_window=3, slope_window_days=7)
    assert slope == pytest.approx(1.0, abs=1e-9)


def test_slope_absent_without_enough_points():
    series = daily_series([float(i) for i in range(10)])
    assert compute_sma_slope(series, START + timedelta(days=9)) is None
    assert compute_sma_slope(daily_series([1.0, 2.0, 3.0]), START) is None


def test_ols_slope_degenerate_inputs():
    assert ols_slope([1.0], [2.0]) is None
    assert ols_slope([3.0, 3.0], [1.0, 5.0]) is None


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(min_value=1.0, max_value=500.0), min_size=20, max_size=40),
    st.floats(min_value=-5.0, max_value=5.0),
)
def test_slope_shifts_with_added_trend(closes, trend):
    base = daily_series(closes)
    trended = daily_series([c + trend * i + 600.0 for i, c in enumerate(closes)])
    completion = START + timedelta(days=8)
    expected = compute_sma_slope(base, completion)
    assert expected is not None
    assert compute_sma_slope(trended, completion) == pytest.approx(expected + trend, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(min_value=1.0, max_value=500.0), min_size=20, max_size=40),
    st.floats(min_value=0.0, max_value=1000.0),
)
def test_slope_ignores_constant_offset(closes, offset):
    completion = START + timedelta(days=8)
    expected = compute_sma_slope(daily_series(closes), completion)
    shifted = compute_sma_slope(daily_series([c + offset for c in closes]), completion)
    assert shifted == pytest.approx(expected, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_sma_length_and_window_bounds(data):
    closes = data.draw(st.lists(st.floats(min_value=0.0, max_value=1e4), min_size=1, max_size=40))
    window = data.draw(st.integers(min_value=1, max_value=len(closes)))
    sma = compute_sma(daily_series(closes), window=window)
    assert len(sma) == len(closes) - window + 1
    for k, (_, value) in enumerate(sma):
        chunk = closes[k : k + window]
        assert min(chunk) - 1e-6 <= value <= max(chunk) + 1e-6


@given(st.integers(min_value=0, max_value=10), st.integers(min_value=1, max_value=10))
def test_sma_shorter_than_window_raises(missing, window):
    n = max(window - 1 - missing, 0)
    with pytest.raises(InsufficientDataError):
        compute_sma(daily_series([1.0] * n), window=window)

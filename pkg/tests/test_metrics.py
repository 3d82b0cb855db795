import math
from datetime import timedelta

import pytest
from hypothesis import given
from hypothesis import strategies as st

from iotdq.errors import DomainError, InsufficientDataError, OrderingError
from iotdq.metrics import (
    CompletenessInputs,
    TimelinessState,
    accuracy,
    completeness,
    overhead_percent,
    precision,
    timeliness_update,
)

from conftest import T0
from formula_cases import (
    ACCURACY_CASES,
    COMPLETENESS_CASES,
    OVERHEAD_CASES,
    PRECISION_CASES,
    TIMELINESS_CASES,
)

TOL = 1e-12


@pytest.mark.parametrize("observed,ref,expected", ACCURACY_CASES)
def test_accuracy_hand_cases(observed, ref, expected):
    assert abs(accuracy(observed, ref) - expected) <= TOL


def test_accuracy_rejects_non_finite():
    with pytest.raises(DomainError):
        accuracy(math.nan, 1.0)
    with pytest.raises(DomainError):
        accuracy(1.0, math.inf)


@given(
    st.floats(-1e6, 1e6, allow_nan=False),
    st.floats(-1e6, 1e6, allow_nan=False),
)
def test_accuracy_symmetric_nonnegative(a, b):
    d = accuracy(a, b)
    assert d >= 0.0
    assert d == accuracy(b, a)
    assert (d == 0.0) == (a == b)


@pytest.mark.parametrize("window,rate,n,expected", COMPLETENESS_CASES)
def test_completeness_hand_cases(window, rate, n, expected):
    got = completeness(CompletenessInputs(window, rate, n))
    assert abs(got - expected) <= TOL


def test_completeness_domain_errors():
    with pytest.raises(DomainError):
        CompletenessInputs(0.0, 120.0, 1)
    with pytest.raises(DomainError):
        CompletenessInputs(7200.0, 0.0, 1)
    with pytest.raises(DomainError):
        CompletenessInputs(7200.0, 120.0, -1)


@given(
    st.floats(1.0, 1e6, allow_nan=False),
    st.floats(0.1, 1e5, allow_nan=False),
    st.integers(0, 10_000),
)
def test_completeness_stays_in_unit_interval_and_monotone(window, rate, n):
    value = completeness(CompletenessInputs(window, rate, n))
    assert 0.0 <= value <= 1.0
    if n:
        assert value <= completeness(CompletenessInputs(window, rate, n - 1))
    else:
        assert value == 1.0


@pytest.mark.parametrize("alpha,prev,raw,expected", TIMELINESS_CASES)
def test_timeliness_hand_cases(alpha, prev, raw, expected):
    state = TimelinessState(prev, T0, alpha)
    new_state, mean = timeliness_update(state, T0 + timedelta(seconds=raw))
    assert abs(mean - expected) <= TOL
    assert new_state.mean_timeliness == mean
    assert new_state.last_observed_at == T0 + timedelta(seconds=raw)
    assert new_state.alpha == alpha


def test_timeliness_rejects_out_of_order():
    state = TimelinessState(120.0, T0, 0.8)
    with pytest.raises(OrderingError):
        timeliness_update(state, T0 - timedelta(seconds=1))


def test_timeliness_alpha_bounds():
    with pytest.raises(DomainError):
        TimelinessState(120.0, T0, 1.5)
    with pytest.raises(DomainError):
        TimelinessState(-1.0, T0, 0.5)


@given(
    st.floats(0.0, 1.0, allow_nan=False),
    st.floats(0.0, 1e4, allow_nan=False),
)
def test_timeliness_fixpoint(alpha, mean):
    # when raw equals the previous mean the mean never moves, for any alpha
    state = TimelinessState(mean, T0, alpha)
    _, new_mean = timeliness_update(state, T0 + timedelta(seconds=mean))
    assert abs(new_mean - mean) <= 1e-9


@pytest.mark.parametrize("assessed,neighbors,expected", PRECISION_CASES)
def test_precision_hand_cases(assessed, neighbors, expected):
    assert abs(precision(assessed, neighbors) - expected) <= TOL


def test_precision_empty_neighbors():
    with pytest.raises(InsufficientDataError):
        precision(1.0, [])


def test_precision_non_finite():
    with pytest.raises(DomainError):
        precision(math.nan, [1.0])


@given(
    st.floats(-100.0, 100.0, allow_nan=False),
    st.lists(st.floats(-100.0, 100.0, allow_nan=False), min_size=1, max_size=20),
    st.floats(-5.0, 5.0, allow_nan=False).filter(lambda c: abs(c) > 1e-3),
)
def test_precision_permutation_and_scale(v, values, c):
    base = precision(v, values)
    assert abs(precision(v, list(reversed(values))) - base) <= 1e-12
    scaled = precision(c * v, [c * x for x in values])
    assert abs(scaled - abs(c) * base) <= 1e-7 * max(1.0, abs(c) * base)


@pytest.mark.parametrize("enriched,raw,expected", OVERHEAD_CASES)
def test_overhead_hand_cases(enriched, raw, expected):
    assert abs(overhead_percent(enriched, raw) - expected) <= TOL


def test_overhead_paper_byte_pairs_round_like_published():
    # 1205-byte raw entity plus 134/137/140 extra bytes
    assert round(overhead_percent(1339, 1205), 1) == 11.1
    assert round(overhead_percent(1342, 1205), 1) == 11.4
    assert round(overhead_percent(1345, 1205), 1) == 11.6


def test_overhead_domain_errors():
    with pytest.raises(DomainError):
        overhead_percent(100, 0)
    with pytest.raises(DomainError):
        overhead_percent(99, 100)

from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ophash.binomial import BinomialModel, ceil_count, floor_count, lower_tail, upper_tail
from ophash.core import InvalidArgument

M = BinomialModel(100, 0.6)


def exact_pmf(K, p, j):
    p = Fraction(p)
    return comb(K, j) * p**j * (1 - p) ** (K - j)


models = st.builds(
    BinomialModel,
    st.integers(1, 30),
    st.floats(0.01, 0.99, allow_nan=False),
)


def test_paper_upper_values():
    assert upper_tail(85, M) == pytest.approx(5.0732e-08, rel=1e-3)
    assert upper_tail(80, M) == pytest.approx(1.64119e-05, rel=1e-3)


def test_paper_lower_values():
    assert lower_tail(59, M) == pytest.approx(0.456705514, rel=1e-3)
    assert lower_tail(44, M) == pytest.approx(0.000881808, rel=1e-3)


def test_whole_support():
    assert upper_tail(0, M) == 1.0
    assert lower_tail(100, M) == 1.0
    assert upper_tail(101, M) == 0.0
    assert lower_tail(-1, M) == 0.0


def test_domain_errors():
    with pytest.raises(InvalidArgument):
        upper_tail(-1, M)
    with pytest.raises(InvalidArgument):
        lower_tail(101, M)
    with pytest.raises(InvalidArgument):
        lower_tail(-2, M)
    with pytest.raises(InvalidArgument):
        BinomialModel(0, 0.5)
    for p in (0.0, 1.0, 1.5):
        with pytest.raises(InvalidArgument):
            BinomialModel(10, p)


def test_extreme_tail_keeps_precision():
    # P(X >= 100) = 0.6^100 exactly
    assert upper_tail(100, M) == pytest.approx(0.6**100, rel=1e-12)
    assert lower_tail(0, M) == pytest.approx(0.4**100, rel=1e-12)


@settings(max_examples=150, deadline=None)
@given(models, st.data())
def test_matches_rational_oracle(model, data):
    K, p = model.trials, model.p
    m = data.draw(st.integers(0, K))
    want_upper = float(sum(exact_pmf(K, p, j) for j in range(m, K + 1)))
    want_lower = float(sum(exact_pmf(K, p, j) for j in range(0, m + 1)))
    assert upper_tail(m, model) == pytest.approx(want_upper, abs=1e-12)
    assert lower_tail(m, model) == pytest.approx(want_lower, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 400), st.floats(0.01, 0.99), st.data())
def test_complement_and_monotone(K, p, data):
    model = BinomialModel(K, p)
    m = data.draw(st.integers(0, K))
    assert lower_tail(m, model) + upper_tail(m + 1, model) == pytest.approx(1.0, abs=1e-12)
    if m < K:
        assert upper_tail(m + 1, model) <= upper_tail(m, model)
        assert lower_tail(m, model) <= lower_tail(m + 1, model)
    assert 0.0 <= upper_tail(m, model) <= 1.0


def test_count_discretization():
    assert ceil_count(85.0) == 85 and floor_count(85.0) == 85
    assert ceil_count(74.2857) == 75 and floor_count(74.2857) == 74
    # float noise around an integer must not shift the count
    assert ceil_count(0.8 * 100) == 80 and ceil_count(79.99999999999999) == 80
    assert floor_count(59.00000000000001) == 59 and floor_count(58.99999999999999) == 59

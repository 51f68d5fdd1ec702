import math
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ophash.bench import pair_workload, run_methods
from ophash.core import EMPTY, FilterParams, FlatBinLayout, IncompatibleSketches, InvalidArgument, Sketch
from ophash.goph import GroupedSketchView, goph_compare, match_counts_filter
from ophash.methods import SketchConfig
from ophash.oph import EmptyBinMode, bin_match_stats, oph_estimate

P6 = FilterParams(threshold=0.6, epsilon=1e-4, k_prime=100, n_groups=10)


def exact_tail(K, p, lo, hi):
    p = Fraction(p)
    return sum(comb(K, j) * p**j * (1 - p) ** (K - j) for j in range(lo, hi + 1))


def oracle_stop(per_group, K=100, n=10, T=0.6, eps=1e-4):
    """First group after which the filter must stop, and how; None when it never stops early."""
    T_ = Fraction(T).limit_denominator(1000)
    total = 0
    for l in range(1, n):
        total += per_group[l - 1]
        m_ra = (n * K * T_ - total) / (n - l)
        if m_ra <= 0:
            return l, True
        if m_ra > K:
            return l, False
        if m_ra < K * T_:
            if exact_tail(K, T_, 0, math.floor(m_ra)) <= eps:
                return l, True
        elif exact_tail(K, T_, math.ceil(m_ra), K) <= eps:
            return l, False
    return None


def test_example_trace():
    verdict, trace = match_counts_filter([65, 5, 10, 10, 10, 10, 10, 10, 10, 10], P6)
    assert trace.required == pytest.approx([59.4444, 66.25, 74.2857, 85.0], abs=1e-4)
    assert [s.cumulative for s in trace] == [65, 70, 80, 90]
    assert [s.action for s in trace] == ["continue", "continue", "continue", "not-similar"]
    assert trace.steps[-1].tail == pytest.approx(5.0732e-08, rel=1e-3)
    assert not verdict.similar and verdict.groups_compared == 4 and verdict.terminated_early


def test_identical_sketches_stop_early_as_similar():
    verdict, _ = match_counts_filter([100] * 10, P6)
    expected = oracle_stop([100] * 10)
    assert expected is not None and expected[1]
    assert verdict.similar and verdict.groups_compared == expected[0] < 10


def test_zero_matches_stop_early_as_not_similar():
    verdict, _ = match_counts_filter([0] * 10, P6)
    expected = oracle_stop([0] * 10)
    assert expected is not None and not expected[1]
    assert not verdict.similar and verdict.groups_compared == expected[0]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 100), min_size=10, max_size=10))
def test_agrees_with_oracle(counts):
    verdict, trace = match_counts_filter(counts, P6)
    expected = oracle_stop(counts)
    if expected is None:
        assert not verdict.terminated_early
        assert verdict.estimate == sum(counts) / 1000
        assert verdict.similar == (sum(counts) / 1000 >= 0.6)
    else:
        assert (verdict.groups_compared, verdict.similar) == expected
    cum = [s.cumulative for s in trace]
    assert cum == sorted(cum) and len(trace) == verdict.groups_compared


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.integers(0, 100), min_size=10, max_size=10),
    st.floats(1e-12, 0.5),
    st.floats(1e-3, 1.0),
)
def test_smaller_epsilon_only_delays(counts, eps1, shrink):
    eps2 = eps1 * shrink
    v1, _ = match_counts_filter(counts, FilterParams(0.7, eps1, 100, 10))
    v2, _ = match_counts_filter(counts, FilterParams(0.7, eps2, 100, 10))
    assert v2.groups_compared >= v1.groups_compared
    if not v1.terminated_early:
        assert not v2.terminated_early and v2.similar == v1.similar


def test_real_sketches_equal_count_filter():
    layout = FlatBinLayout(4000, 1000)
    rng = np.random.default_rng(0)
    left = tuple(int(x) for x in rng.integers(0, 4, size=1000))
    counts = [int(x) for x in rng.integers(40, 90, size=10)]
    right = list(left)
    for g, m in enumerate(counts):
        for i in range(g * 100 + m, (g + 1) * 100):
            right[i] = (left[i] + 1) % 4
    a, b = Sketch(layout, left, 5), Sketch(layout, tuple(right), 5)
    for T in (0.5, 0.6, 0.7):
        params = FilterParams(T, 1e-4, 100, 10)
        got, _ = goph_compare(a, b, params)
        want, _ = match_counts_filter(counts, params)
        assert got == want


def test_vanishing_epsilon_reproduces_full_verdict():
    layout = FlatBinLayout(2000, 1000)
    a = tuple([0] * 1000)
    params = FilterParams(0.7, 1e-300, 100, 10)
    for b in (
        tuple([0] * 650 + [EMPTY] * 100 + [1] * 250),
        tuple([1] * 250 + [EMPTY] * 100 + [0] * 650),
    ):
        sa, sb = Sketch(layout, a, 1), Sketch(layout, b, 1)
        for mode in EmptyBinMode:
            v, _ = goph_compare(sa, sb, params, mode)
            assert v.similar == (oph_estimate(bin_match_stats(sa, sb, mode)) >= 0.7)


def test_runs_to_final_estimate_when_undecided():
    # Mismatches first: neither certainty check can fire before the last group.
    layout = FlatBinLayout(2000, 1000)
    sa = Sketch(layout, tuple([0] * 1000), 1)
    sb = Sketch(layout, tuple([1] * 250 + [EMPTY] * 100 + [0] * 650), 1)
    v, trace = goph_compare(sa, sb, FilterParams(0.7, 1e-300, 100, 10), EmptyBinMode.EITHER_EMPTY)
    assert not v.terminated_early and v.estimate == pytest.approx(650 / 900) and v.similar
    assert trace.steps[-1].rule == "final"


def test_view_validation():
    layout = FlatBinLayout(1000, 100)
    sk = Sketch(layout, tuple([0] * 100), 1)
    with pytest.raises(InvalidArgument):
        GroupedSketchView(sk, 3, 30)
    other = Sketch(layout, tuple([0] * 100), 2)
    with pytest.raises(IncompatibleSketches):
        goph_compare(GroupedSketchView(sk, 10, 10), GroupedSketchView(other, 10, 10), FilterParams(k_prime=10))
    with pytest.raises(InvalidArgument):
        match_counts_filter([1, 2], P6)
    with pytest.raises(InvalidArgument):
        match_counts_filter([101] * 10, P6)


def test_threshold_one_uses_certainty_only():
    params = FilterParams(1.0, 1e-4, 100, 10)
    v, _ = match_counts_filter([100] * 10, params)
    assert v.similar and not v.terminated_early
    v, _ = match_counts_filter([99] + [100] * 9, params)
    assert not v.similar and v.groups_compared == 1


def test_soundness_and_work_on_sample():
    pairs = pair_workload(400, seed=77)
    params = FilterParams(0.7, 1e-4, 100, 10)
    runs = run_methods(pairs, ["oph", "goph"], params, SketchConfig())
    J = np.array([p.jaccard for p in pairs])
    far = np.abs(J - 0.7) > 0.1
    assert np.all(runs["goph"].similar[far] == runs["oph"].similar[far])
    assert np.mean(runs["goph"].similar == runs["oph"].similar) >= 0.99
    assert runs["goph"].groups_compared[J <= 0.5].mean() < 5

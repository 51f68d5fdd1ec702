"""Hierarchical OPH.

The vocabulary is split front-to-back: a front group takes ``r = a/(a+b)`` of
what remains and is cut into ``k'`` bins, and the rest is split again while
both parts stay larger than ``k'``.  Group ``j`` carries nominal weight
``r(1-r)^(j-1)`` (the last group takes the residual ``(1-r)^(L-1)``), so the
first groups dominate the estimate and a comparison usually settles after
one or two of them.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .core import (
    ComparisonVerdict,
    Decision,
    FeatureSet,
    FilterParams,
    HierarchicalBinLayout,
    InvalidArgument,
    Permutation,
    Sketch,
    UndefinedEstimate,
    check_comparable,
)
from .goph import CONTINUE, NOT_SIMILAR, SIMILAR, FilterStep, FilterTrace, filter_model, tail_decision
from .oph import DEFAULT_MODE, EmptyBinMode, count_bins, sketch_values


def hoph_layout(vocab_size: int, a: int, b: int, k_prime: int) -> HierarchicalBinLayout:
    if a < 1 or b < 1:
        raise InvalidArgument("ratio terms a and b must be positive")
    if k_prime < 1:
        raise InvalidArgument("k_prime must be at least 1")
    if vocab_size < 2 * k_prime:
        raise InvalidArgument(f"vocab_size {vocab_size} is below 2 * k_prime = {2 * k_prime}")
    groups = []
    start, remaining = 0, vocab_size
    while True:
        front = (remaining * a) // (a + b)
        rest = remaining - front
        if front <= k_prime or rest <= k_prime:
            break
        groups.append((start, front))
        start, remaining = start + front, rest
    groups.append((start, remaining))
    return HierarchicalBinLayout(vocab_size, a, b, k_prime, tuple(groups))


def group_weights(layout: HierarchicalBinLayout) -> tuple[float, ...]:
    """Nominal group weights; they sum to one."""
    return _float_weights(layout.a, layout.b, layout.n_groups)


def exact_group_weights(layout: HierarchicalBinLayout) -> tuple[Fraction, ...]:
    return _exact_weights(layout.a, layout.b, layout.n_groups)


@lru_cache(maxsize=None)
def _exact_weights(a: int, b: int, n: int) -> tuple[Fraction, ...]:
    r = Fraction(a, a + b)
    weights = [r * (1 - r) ** j for j in range(n - 1)]
    weights.append((1 - r) ** (n - 1))
    return tuple(weights)


@lru_cache(maxsize=None)
def _float_weights(a: int, b: int, n: int) -> tuple[float, ...]:
    return tuple(float(w) for w in _exact_weights(a, b, n))


def hoph_sketch(s: FeatureSet, p: Permutation, layout: HierarchicalBinLayout) -> Sketch:
    """Per group, per bin: the smallest permuted element's offset within the bin."""
    return Sketch(layout, sketch_values(s, p, layout), p.seed)


def _check(s1: Sketch, s2: Sketch) -> HierarchicalBinLayout:
    check_comparable(s1, s2)
    if not isinstance(s1.layout, HierarchicalBinLayout):
        raise InvalidArgument("hierarchical comparison needs hierarchical sketches")
    return s1.layout


def group_stats(s1: Sketch, s2: Sketch, mode: EmptyBinMode = DEFAULT_MODE) -> list[tuple[int, int]]:
    """``(matched, excluded)`` for every group, in order."""
    layout = _check(s1, s2)
    return [
        count_bins(s1.values[layout.group_bins(j)], s2.values[layout.group_bins(j)], mode)
        for j in range(layout.n_groups)
    ]


def hoph_estimate(s1: Sketch, s2: Sketch, mode: EmptyBinMode = DEFAULT_MODE) -> float:
    """Weight-averaged per-group OPH estimates.

    Groups whose every bin is excluded are dropped and the remaining weights
    renormalized.
    """
    layout = _check(s1, s2)
    kp = layout.k_prime
    masses, kept = [], []
    for w, (m, x) in zip(group_weights(layout), group_stats(s1, s2, mode)):
        if x < kp:
            masses.append(w * (m / (kp - x)))
            kept.append(w)
    if not kept:
        raise UndefinedEstimate("every group is fully excluded")
    return _weighted_mean(masses, kept)


def _weighted_mean(masses: list[float], kept: list[float]) -> float:
    # each mass term is at most its weight, so fsum keeps the ratio within [0, 1]
    return math.fsum(masses) / math.fsum(kept)


def _lemma_form(counts: Sequence[float], r: float, l: int | None) -> float:
    counts = list(counts)
    if l is not None:
        if len(counts) == l + 1:
            counts = counts[:-2] + [counts[-2] + counts[-1]]
        elif len(counts) != l:
            raise InvalidArgument(f"expected {l} or {l + 1} group counts, got {len(counts)}")
    l = len(counts)
    if l < 1:
        raise InvalidArgument("at least one group count is required")
    head = sum(r ** (2 * j) * counts[j - 1] for j in range(1, l))
    return (head + r ** (2 * l - 1) * counts[l - 1]) * (l + 1)


def hoph_aggregate_matched(per_group_matched: Sequence[float], r: float, l: int | None = None) -> float:
    """``(sum_{j<l} r^(2j) N_j + r^(2l-1) N_l) * (l+1)``.

    Pass ``l`` counts, or ``l + 1`` counts together with ``l`` to have the last
    two summed first.
    """
    return _lemma_form(per_group_matched, r, l)


def hoph_aggregate_empty(per_group_empty: Sequence[float], r: float, l: int | None = None) -> float:
    """Same aggregation as :func:`hoph_aggregate_matched`, applied to empty-bin counts."""
    return _lemma_form(per_group_empty, r, l)


def lemma_estimate(matched: Sequence[int], excluded: Sequence[int], bins: Sequence[int], r: float) -> float:
    """``sum_{j<l} r^j N_j/(k_j - E_j) + r^(l-1) N_l/(k_l - E_l)`` over ``l + 1`` groups.

    The last two groups are pooled (counts and bins summed) into group ``l``.
    """
    if not len(matched) == len(excluded) == len(bins) >= 2:
        raise InvalidArgument("need at least two groups with matching count lists")
    m = list(matched[:-2]) + [matched[-2] + matched[-1]]
    e = list(excluded[:-2]) + [excluded[-2] + excluded[-1]]
    k = list(bins[:-2]) + [bins[-2] + bins[-1]]
    l = len(m)
    ratios = []
    for mj, ej, kj in zip(m, e, k):
        if kj - ej < 1:
            raise UndefinedEstimate("a pooled group has every bin excluded")
        ratios.append(mj / (kj - ej))
    return sum(r**j * ratios[j - 1] for j in range(1, l)) + r ** (l - 1) * ratios[l - 1]


def hoph_lemma_estimate(s1: Sketch, s2: Sketch, mode: EmptyBinMode = DEFAULT_MODE) -> float:
    layout = _check(s1, s2)
    stats = group_stats(s1, s2, mode)
    if len(stats) < 2:
        raise InvalidArgument("the pooled-group estimator needs at least two groups")
    bins = [layout.k_prime] * len(stats)
    return lemma_estimate([m for m, _ in stats], [x for _, x in stats], bins, layout.ratio)


def hoph_compare(
    s1: Sketch,
    s2: Sketch,
    params: FilterParams,
    mode: EmptyBinMode = DEFAULT_MODE,
) -> tuple[ComparisonVerdict, FilterTrace]:
    """Group-by-group comparison with early termination on the weight balance.

    After group ``l`` the achieved mass is ``sum_{j<=l} w_j M_j / k'`` and the
    match fraction still needed over the remaining weight is
    ``P_r = (T - achieved) / sum_{j>l} w_j``; ``P_r * k'`` is then tested
    against a ``Binomial(k', T)`` tail exactly as in GOPH.  The certainty
    checks and the final verdict use :func:`hoph_estimate`'s arithmetic.
    """
    layout = _check(s1, s2)
    kp, T, eps = layout.k_prime, params.threshold, params.epsilon
    weights = group_weights(layout)
    n = len(weights)
    suffix = [0.0] * (n + 1)
    for j in range(n - 1, -1, -1):
        suffix[j] = suffix[j + 1] + weights[j]
    model = filter_model(kp, T)
    trace = FilterTrace()
    achieved = 0.0
    masses, kept_w = [], []
    matched_total = 0

    for j in range(n):
        sl = layout.group_bins(j)
        m, x = count_bins(s1.values[sl], s2.values[sl], mode)
        w = weights[j]
        matched_total += m
        achieved += w * m / kp
        if x < kp:
            masses.append(w * (m / (kp - x)))
            kept_w.append(w)
        l = j + 1
        if l == n:
            break
        rest = suffix[l]
        p_r = (T - achieved) / rest
        mass, kept = math.fsum(masses), math.fsum(kept_w)
        if mass / (kept + rest) >= T:
            trace.steps.append(FilterStep(l, m, matched_total, p_r, None, SIMILAR, "certain"))
            return ComparisonVerdict(Decision.SIMILAR, l, n, True), trace
        if (mass + rest) / (kept + rest) < T:
            trace.steps.append(FilterStep(l, m, matched_total, p_r, None, NOT_SIMILAR, "certain"))
            return ComparisonVerdict(Decision.NOT_SIMILAR, l, n, True), trace
        tail, action = tail_decision(p_r * kp, kp * T, model, eps)
        rule = "small-probability" if action != CONTINUE else None
        trace.steps.append(FilterStep(l, m, matched_total, p_r, tail, action, rule))
        if action != CONTINUE:
            return ComparisonVerdict(Decision(action.replace("-", "_")), l, n, True), trace

    if not kept_w:
        raise UndefinedEstimate("every group is fully excluded")
    estimate = _weighted_mean(masses, kept_w)
    similar = estimate >= T
    trace.steps.append(FilterStep(n, m, matched_total, None, None, SIMILAR if similar else NOT_SIMILAR, "final"))
    return ComparisonVerdict(Decision.from_bool(similar), n, n, False, estimate), trace


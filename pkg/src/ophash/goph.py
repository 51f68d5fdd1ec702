"""Group-based OPH: compare a flat sketch group by group and stop early.

After each group the comparison works out how many matches per remaining
group are still needed to reach the threshold (``M_ra``).  If, under a
``Binomial(k', T)`` model of one group, reaching (or falling short of) that
requirement is a small-probability event (tail <= epsilon), the verdict is
issued without looking at the remaining groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .binomial import BinomialModel, ceil_count, floor_count, lower_tail, upper_tail
from .core import (
    ComparisonVerdict,
    Decision,
    FilterParams,
    FlatBinLayout,
    InvalidArgument,
    Sketch,
    UndefinedEstimate,
    check_comparable,
)
from .oph import DEFAULT_MODE, EmptyBinMode, count_bins

CONTINUE = "continue"
SIMILAR = "similar"
NOT_SIMILAR = "not-similar"


@dataclass(frozen=True)
class GroupedSketchView:
    """A flat sketch of ``n_groups * k_prime`` bins read as consecutive groups."""

    sketch: Sketch
    n_groups: int
    k_prime: int

    def __post_init__(self):
        if not isinstance(self.sketch.layout, FlatBinLayout):
            raise InvalidArgument("grouped views need a flat-layout sketch")
        if self.n_groups * self.k_prime != self.sketch.layout.k:
            raise InvalidArgument(
                f"{self.n_groups} groups of {self.k_prime} bins do not tile {self.sketch.layout.k} bins"
            )

    def group(self, l: int) -> tuple[int, ...]:
        """Values of group ``l`` (0-based)."""
        kp = self.k_prime
        return self.sketch.values[l * kp : (l + 1) * kp]


@dataclass(frozen=True)
class FilterStep:
    """Filter state after comparing one group.

    ``required`` is ``M_ra`` (matches per remaining group) for GOPH and ``P_r``
    (match fraction over the remaining weight) for HOPH; it is ``None`` after
    the last group.  ``rule`` names what ended the comparison: ``"certain"``
    when the threshold outcome is already decided whatever the remaining bins
    hold, ``"small-probability"`` for a tail at or below epsilon, ``"final"``
    for the full estimate.
    """

    group: int
    matched: int
    cumulative: int
    required: float | None
    tail: float | None
    action: str
    rule: str | None = None


@dataclass
class FilterTrace:
    steps: list[FilterStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def required(self) -> list[float | None]:
        return [s.required for s in self.steps]


def tail_decision(required: float, expected: float, model: BinomialModel | None, eps: float):
    """Apply the small-probability test to a requirement of ``required`` matches.

    Returns ``(tail, action)``; ``tail`` is ``None`` when no test applies.
    """
    if model is None or not 0 < required <= model.trials:
        return None, CONTINUE
    if required < expected:
        tail = lower_tail(floor_count(required), model)
        return tail, SIMILAR if tail <= eps else CONTINUE
    tail = upper_tail(ceil_count(required), model)
    return tail, NOT_SIMILAR if tail <= eps else CONTINUE


def filter_model(k_prime: int, threshold: float) -> BinomialModel | None:
    # At T = 1 the per-group model is degenerate; only the certainty checks apply.
    return BinomialModel(k_prime, threshold) if threshold < 1 else None


def _as_view(x: GroupedSketchView | Sketch, params: FilterParams) -> GroupedSketchView:
    if isinstance(x, GroupedSketchView):
        return x
    return GroupedSketchView(x, params.n_groups, params.k_prime)


def goph_compare(
    a: GroupedSketchView | Sketch,
    b: GroupedSketchView | Sketch,
    params: FilterParams,
    mode: EmptyBinMode = DEFAULT_MODE,
) -> tuple[ComparisonVerdict, FilterTrace]:
    """Progressively compare two grouped sketches with early termination.

    The filter itself counts raw matched bins.  Its certainty checks, and the
    verdict after the last group, use the ``mode`` estimator
    ``matched / (k - excluded)``, so with an unreachable ``epsilon`` the
    verdict always equals the full OPH comparison.
    """
    va, vb = _as_view(a, params), _as_view(b, params)
    check_comparable(va.sketch, vb.sketch)
    if (va.n_groups, va.k_prime) != (vb.n_groups, vb.k_prime):
        raise InvalidArgument("grouped views disagree on group structure")

    n, kp, T, eps = va.n_groups, va.k_prime, params.threshold, params.epsilon
    k = n * kp
    model = filter_model(kp, T)
    expected = kp * T
    target = n * kp * T
    trace = FilterTrace()
    matched = excluded = 0

    for l in range(1, n + 1):
        m, x = count_bins(va.group(l - 1), vb.group(l - 1), mode)
        matched += m
        excluded += x
        if l == n:
            break
        required = (target - matched) / (n - l)
        remaining = (n - l) * kp
        live = k - excluded
        if matched / live >= T:
            trace.steps.append(FilterStep(l, m, matched, required, None, SIMILAR, "certain"))
            return ComparisonVerdict(Decision.SIMILAR, l, n, True), trace
        if (matched + remaining) / live < T:
            trace.steps.append(FilterStep(l, m, matched, required, None, NOT_SIMILAR, "certain"))
            return ComparisonVerdict(Decision.NOT_SIMILAR, l, n, True), trace
        tail, action = tail_decision(required, expected, model, eps)
        rule = "small-probability" if action != CONTINUE else None
        trace.steps.append(FilterStep(l, m, matched, required, tail, action, rule))
        if action != CONTINUE:
            return ComparisonVerdict(Decision(action.replace("-", "_")), l, n, True), trace

    if k - excluded < 1:
        raise UndefinedEstimate("every bin is excluded; both sets are effectively empty")
    estimate = matched / (k - excluded)
    similar = estimate >= T
    action = SIMILAR if similar else NOT_SIMILAR
    trace.steps.append(FilterStep(n, m, matched, None, None, action, "final"))
    return ComparisonVerdict(Decision.from_bool(similar), n, n, False, estimate), trace


def match_counts_filter(
    group_matches: list[int],
    params: FilterParams,
) -> tuple[ComparisonVerdict, FilterTrace]:
    """Run the GOPH filter on per-group match counts alone (no empty bins).

    Convenient for exploring the filter without building sketches; equivalent
    to :func:`goph_compare` on sketches with those match counts and no empty bins.
    """
    n, kp = params.n_groups, params.k_prime
    if len(group_matches) != n:
        raise InvalidArgument(f"expected {n} group counts, got {len(group_matches)}")
    if any(not 0 <= m <= kp for m in group_matches):
        raise InvalidArgument(f"group match counts must lie in [0, {kp}]")
    layout = FlatBinLayout(2 * n * kp, n * kp)
    left = tuple(0 for _ in range(n * kp))
    right = []
    for m in group_matches:
        right.extend([0] * m + [1] * (kp - m))
    a = Sketch(layout, left, None)
    b = Sketch(layout, tuple(right), None)
    return goph_compare(a, b, params)

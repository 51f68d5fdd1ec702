"""Exact binomial tail probabilities for the small-probability-event filter.

Probabilities are accumulated from log-space terms with :func:`math.fsum`, so
tails as small as ``1e-300`` keep full relative precision.  Tables for a given
``(trials, p)`` are built once and cached because the filters query the same
model many times per comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .core import InvalidArgument

# Float noise tolerance when turning a fractional requirement into a count.
_SNAP = 1e-9


@dataclass(frozen=True)
class BinomialModel:
    trials: int
    p: float

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidArgument(f"trials must be at least 1, got {self.trials}")
        if not 0 < self.p < 1:
            raise InvalidArgument(f"success probability must be in (0, 1), got {self.p}")


def log_pmf(j: int, model: BinomialModel) -> float:
    n, p = model.trials, model.p
    return math.log(math.comb(n, j)) + j * math.log(p) + (n - j) * math.log1p(-p)


@lru_cache(maxsize=64)
def _tables(trials: int, p: float) -> tuple[tuple[float, ...], tuple[float, ...]]:
    model = BinomialModel(trials, p)
    pmf = [math.exp(log_pmf(j, model)) for j in range(trials + 1)]
    total = math.fsum(pmf)
    pmf = [x / total for x in pmf]
    # lower[m] = P(X <= m), upper[m] = P(X >= m); each summed independently so
    # that neither tail is derived by subtraction from 1.
    lower = tuple(min(1.0, math.fsum(pmf[: m + 1])) for m in range(trials + 1))
    upper = tuple(min(1.0, math.fsum(pmf[m:])) for m in range(trials + 1))
    # Whole-support sums are exactly one.
    return lower[:-1] + (1.0,), (1.0,) + upper[1:]


def upper_tail(m: int, model: BinomialModel) -> float:
    """``P(X >= m)`` for ``X ~ Binomial(model.trials, model.p)``."""
    if m < 0:
        raise InvalidArgument(f"upper_tail needs m >= 0, got {m}")
    if m > model.trials:
        return 0.0
    return _tables(model.trials, model.p)[1][m]


def lower_tail(m: int, model: BinomialModel) -> float:
    """``P(X <= m)`` for ``X ~ Binomial(model.trials, model.p)``."""
    if m > model.trials:
        raise InvalidArgument(f"lower_tail needs m <= {model.trials}, got {m}")
    if m < -1:
        raise InvalidArgument(f"lower_tail needs m >= -1, got {m}")
    if m == -1:
        return 0.0
    return _tables(model.trials, model.p)[0][m]


def ceil_count(x: float) -> int:
    """Smallest integer count at or above ``x``, ignoring float noise below 1e-9."""
    return math.ceil(x - _SNAP)


def floor_count(x: float) -> int:
    """Largest integer count at or below ``x``, ignoring float noise below 1e-9."""
    return math.floor(x + _SNAP)

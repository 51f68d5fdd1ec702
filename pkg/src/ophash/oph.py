"""One Permutation Hashing.

A single permutation maps a feature set into ``[0, |V|)``; the space is cut
into bins and each bin keeps its smallest permuted element as an offset from
the bin start.  Two sketches agree on a bin with probability equal to the
Jaccard similarity of the underlying sets.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    EMPTY,
    FeatureSet,
    FlatBinLayout,
    InvalidArgument,
    Layout,
    Permutation,
    Sketch,
    UndefinedEstimate,
    check_comparable,
)


class EmptyBinMode(enum.Enum):
    """Which bins are excluded from the estimator's denominator.

    ``JOINT_EMPTY`` drops a bin only when both sketches are empty there; this
    is the unbiased estimator.  ``EITHER_EMPTY`` drops a bin when either side
    is empty and is what the worked examples (0.333, 0.375) use.
    """

    JOINT_EMPTY = "joint-empty"
    EITHER_EMPTY = "either-empty"


DEFAULT_MODE = EmptyBinMode.EITHER_EMPTY


@dataclass(frozen=True)
class BinMatchStats:
    n_matched: int
    n_excluded: int
    k: int
    mode: EmptyBinMode = DEFAULT_MODE

    def __post_init__(self):
        if not (0 <= self.n_excluded <= self.k and 0 <= self.n_matched <= self.k - self.n_excluded):
            raise InvalidArgument(f"inconsistent bin statistics {self}")


_LOOKUP_LIMIT = 1 << 24


@lru_cache(maxsize=16)
def _bin_lookup(layout: Layout) -> np.ndarray:
    """Bin index of every permuted position."""
    widths = np.diff(layout.boundaries)
    return np.repeat(np.arange(widths.size, dtype=np.int32), widths)


def sketch_values(s: FeatureSet, p: Permutation, layout: Layout) -> tuple[int, ...]:
    """Smallest permuted element per bin, as an offset, for any layout's bin edges."""
    if not (s.vocab_size == layout.vocab_size == p.size):
        raise InvalidArgument(
            f"vocabulary mismatch: set={s.vocab_size}, layout={layout.vocab_size}, permutation={p.size}"
        )
    edges = layout.boundaries
    values = np.full(layout.total_bins, EMPTY, dtype=np.int64)
    if len(s):
        permuted = np.sort(p.mapping[s.ids])
        lookup = _bin_lookup(layout) if layout.vocab_size <= _LOOKUP_LIMIT else None
        if lookup is None:
            bins = np.searchsorted(edges, permuted, side="right") - 1
        else:
            bins = lookup[permuted]
        first = np.ones(bins.size, dtype=bool)
        first[1:] = bins[1:] != bins[:-1]
        hit = bins[first]
        values[hit] = permuted[first] - edges[hit]
    return tuple(values.tolist())


def oph_sketch(s: FeatureSet, p: Permutation, layout: FlatBinLayout) -> Sketch:
    return Sketch(layout, sketch_values(s, p, layout), p.seed)


def count_bins(a, b, mode: EmptyBinMode) -> tuple[int, int]:
    """Return ``(matched, excluded)`` over two aligned value sequences."""
    matched = sum(1 for x, y in zip(a, b) if x == y and x != EMPTY)
    if mode is EmptyBinMode.EITHER_EMPTY:
        excluded = sum(1 for x, y in zip(a, b) if x == EMPTY or y == EMPTY)
    else:
        excluded = sum(1 for x, y in zip(a, b) if x == EMPTY and y == EMPTY)
    return matched, excluded


def bin_match_stats(s1: Sketch, s2: Sketch, mode: EmptyBinMode = DEFAULT_MODE) -> BinMatchStats:
    check_comparable(s1, s2)
    matched, excluded = count_bins(s1.values, s2.values, mode)
    return BinMatchStats(matched, excluded, len(s1.values), mode)


def oph_estimate(stats: BinMatchStats) -> float:
    """Matched bins over non-excluded bins."""
    denom = stats.k - stats.n_excluded
    if denom < 1:
        raise UndefinedEstimate("every bin is excluded; both sets are effectively empty")
    return stats.n_matched / denom


def oph_similarity(s1: Sketch, s2: Sketch, mode: EmptyBinMode = DEFAULT_MODE) -> float:
    return oph_estimate(bin_match_stats(s1, s2, mode))


def expected_inverse_nonempty(
    g: int,
    k: int,
    trials: int,
    seed: int,
    vocab_size: int | None = None,
) -> float:
    """Monte-Carlo estimate of ``E[1 / (k - N_empty)]`` for ``g`` union elements.

    With ``vocab_size`` the ``g`` elements land on distinct random positions of
    a flat ``k``-bin layout over that vocabulary, exactly as a random
    permutation would place them.  Without it each element falls into a bin
    independently and uniformly.
    """
    rng = np.random.default_rng(seed)
    total = 0.0
    if vocab_size is None:
        batch = max(1, min(trials, 2_000_000 // max(g, 1)))
        done = 0
        while done < trials:
            m = min(batch, trials - done)
            bins = np.sort(rng.integers(0, k, size=(m, g)), axis=1)
            occupied = 1 + np.count_nonzero(np.diff(bins, axis=1), axis=1)
            total += float(np.sum(1.0 / occupied))
            done += m
    else:
        if g > vocab_size:
            raise InvalidArgument("union size cannot exceed the vocabulary")
        edges = FlatBinLayout(vocab_size, k).boundaries
        for _ in range(trials):
            pos = rng.choice(vocab_size, size=g, replace=False)
            occupied = np.unique(np.searchsorted(edges, pos, side="right")).size
            total += 1.0 / occupied
    return total / trials


def oph_variance_mc(
    R: float,
    g: int,
    k: int,
    trials: int,
    seed: int,
    vocab_size: int | None = None,
) -> float:
    """Variance of the joint-empty OPH estimator for Jaccard ``R`` and union size ``g``.

    ``var = R(1-R) * (E[1/(k-N_empty)] * (1 + 1/(g-1)) - 1/(g-1))`` with the
    expectation estimated by simulation.
    """
    if not 0 <= R <= 1:
        raise InvalidArgument(f"R must be in [0, 1], got {R}")
    if g < 2:
        raise InvalidArgument("union size g must be at least 2")
    if k < 1:
        raise InvalidArgument("k must be at least 1")
    if R in (0, 1):
        return 0.0
    e_inv = expected_inverse_nonempty(g, k, trials, seed, vocab_size)
    return R * (1 - R) * (e_inv * (1 + 1 / (g - 1)) - 1 / (g - 1))

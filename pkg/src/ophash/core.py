"""Domain types shared by every sketch variant.

Feature sets are sorted arrays of integer IDs drawn from a vocabulary
``[0, vocab_size)``.  A :class:`Permutation` is a materialized bijection on
that vocabulary.  Bin layouts partition the permuted ID space, and a
:class:`Sketch` records, per bin, the smallest permuted element as an offset
from the bin start (or :data:`EMPTY`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

#: Marker for a bin that holds no element of the permuted set.
EMPTY = -1

_SEED_MASK = (1 << 64) - 1


class InvalidArgument(ValueError):
    """Raised when inputs violate an operation's preconditions."""


class IncompatibleSketches(InvalidArgument):
    """Raised when two sketches were built with different layouts or permutations."""


class UndefinedEstimate(ArithmeticError):
    """Raised when a similarity cannot be estimated (every bin excluded, or both sets empty)."""


def _index_dtype(size: int) -> np.dtype:
    return np.dtype(np.int32) if size < 2**31 else np.dtype(np.int64)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class FeatureSet:
    """An immutable, strictly increasing set of feature IDs below ``vocab_size``."""

    __slots__ = ("ids", "vocab_size")

    def __init__(self, ids: Sequence[int] | np.ndarray, vocab_size: int):
        if vocab_size < 1:
            raise InvalidArgument(f"vocab_size must be positive, got {vocab_size}")
        arr = np.array(ids, dtype=np.int64).reshape(-1)
        if arr.size:
            if arr[0] < 0 or arr[-1] >= vocab_size:
                raise InvalidArgument(f"feature ids must lie in [0, {vocab_size})")
            if arr.size > 1 and not np.all(arr[1:] > arr[:-1]):
                raise InvalidArgument("feature ids must be strictly increasing")
        self.ids = _frozen(arr)
        self.vocab_size = int(vocab_size)

    @classmethod
    def from_items(cls, items: Iterable[int], vocab_size: int) -> "FeatureSet":
        """Build from an arbitrary iterable of IDs, deduplicating and sorting."""
        arr = np.unique(np.fromiter(items, dtype=np.int64))
        return cls(arr, vocab_size)

    def __len__(self) -> int:
        return int(self.ids.size)

    def __iter__(self):
        return iter(self.ids.tolist())

    def __contains__(self, item: int) -> bool:
        i = np.searchsorted(self.ids, item)
        return bool(i < self.ids.size and self.ids[i] == item)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureSet):
            return NotImplemented
        return self.vocab_size == other.vocab_size and np.array_equal(self.ids, other.ids)

    def __hash__(self) -> int:
        return hash((self.vocab_size, self.ids.tobytes()))

    def __repr__(self) -> str:
        head = self.ids[:8].tolist()
        tail = ", ..." if self.ids.size > 8 else ""
        return f"FeatureSet({head}{tail}, vocab_size={self.vocab_size})"


class Permutation:
    """A materialized bijection on ``[0, size)``.

    ``seed`` is ``None`` only for the identity permutation.
    """

    __slots__ = ("mapping", "seed")

    def __init__(self, mapping: np.ndarray, seed: int | None):
        self.mapping = _frozen(np.asarray(mapping))
        self.seed = seed

    @property
    def size(self) -> int:
        return int(self.mapping.size)

    @classmethod
    def identity(cls, size: int) -> "Permutation":
        if size < 1:
            raise InvalidArgument("permutation size must be at least 1")
        return cls(np.arange(size, dtype=_index_dtype(size)), None)

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.mapping)
        inv[self.mapping] = np.arange(self.size, dtype=self.mapping.dtype)
        return inv

    def __call__(self, x: int) -> int:
        return int(self.mapping[x])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.mapping, other.mapping)

    def __hash__(self) -> int:
        return hash((self.seed, self.size))

    def __repr__(self) -> str:
        return f"Permutation(size={self.size}, seed={self.seed})"


def permutation_generate(seed: int, size: int) -> Permutation:
    """Uniform random bijection on ``[0, size)``, reproducible from ``(seed, size)``."""
    if size < 1:
        raise InvalidArgument("permutation size must be at least 1")
    seed = int(seed) & _SEED_MASK
    rng = np.random.default_rng(seed)
    mapping = rng.permutation(size).astype(_index_dtype(size), copy=False)
    return Permutation(mapping, seed)


def permutation_apply(p: Permutation, s: FeatureSet) -> FeatureSet:
    if s.vocab_size != p.size:
        raise InvalidArgument(
            f"feature set vocabulary {s.vocab_size} does not match permutation size {p.size}"
        )
    return FeatureSet(np.sort(p.mapping[s.ids].astype(np.int64)), s.vocab_size)


def floor_boundaries(start: int, length: int, bins: int) -> np.ndarray:
    """Edges ``start + floor(i * length / bins)`` for ``i = 0..bins``."""
    i = np.arange(bins + 1, dtype=np.int64)
    return start + (i * length) // bins


@dataclass(frozen=True)
class FlatBinLayout:
    """``k`` bins over ``[0, vocab_size)``; bin ``i`` covers ``[floor(i|V|/k), floor((i+1)|V|/k))``."""

    vocab_size: int
    k: int
    boundaries: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgument("bin count k must be at least 1")
        if self.k > self.vocab_size:
            raise InvalidArgument(f"bin count {self.k} exceeds vocabulary size {self.vocab_size}")
        object.__setattr__(self, "boundaries", _frozen(floor_boundaries(0, self.vocab_size, self.k)))

    @property
    def total_bins(self) -> int:
        return self.k


@dataclass(frozen=True)
class HierarchicalBinLayout:
    """Contiguous groups of ``k_prime`` bins each, built by recursive ``a:b`` splits.

    ``groups`` holds ``(start, length)`` ranges in order; bins inside a group use
    the same floor rule as :class:`FlatBinLayout`.  Use
    :func:`ophash.hoph.hoph_layout` to construct one from a ratio.
    """

    vocab_size: int
    a: int
    b: int
    k_prime: int
    groups: tuple[tuple[int, int], ...]
    boundaries: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.a < 1 or self.b < 1:
            raise InvalidArgument("ratio terms a and b must be positive")
        if self.k_prime < 1:
            raise InvalidArgument("k_prime must be at least 1")
        pos = 0
        for start, length in self.groups:
            if start != pos:
                raise InvalidArgument("groups must be contiguous and start at 0")
            if length < self.k_prime:
                raise InvalidArgument(f"group length {length} is smaller than k_prime={self.k_prime}")
            pos += length
        if pos != self.vocab_size:
            raise InvalidArgument("groups must cover the whole vocabulary")
        edges = [floor_boundaries(s, n, self.k_prime)[:-1] for s, n in self.groups]
        edges.append(np.array([self.vocab_size], dtype=np.int64))
        object.__setattr__(self, "boundaries", _frozen(np.concatenate(edges)))

    @property
    def ratio(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def total_bins(self) -> int:
        return self.n_groups * self.k_prime

    def group_bins(self, j: int) -> slice:
        """Slice of the flat value vector holding group ``j`` (0-based)."""
        return slice(j * self.k_prime, (j + 1) * self.k_prime)


Layout = FlatBinLayout | HierarchicalBinLayout


@dataclass(frozen=True)
class Sketch:
    """Per-bin values in layout order: an offset within the bin, or :data:`EMPTY`."""

    layout: Layout
    values: tuple[int, ...]
    seed: int | None

    def __post_init__(self):
        if len(self.values) != self.layout.total_bins:
            raise InvalidArgument(
                f"sketch has {len(self.values)} values but layout has {self.layout.total_bins} bins"
            )

    def blocks(self) -> list[tuple[int, ...]]:
        """Values split into per-group blocks (one block for a flat layout)."""
        if isinstance(self.layout, HierarchicalBinLayout):
            kp = self.layout.k_prime
            return [self.values[i : i + kp] for i in range(0, len(self.values), kp)]
        return [self.values]

    def __repr__(self) -> str:
        shown = ", ".join("⊗" if v == EMPTY else str(v) for v in self.values[:16])
        more = ", ..." if len(self.values) > 16 else ""
        return f"Sketch([{shown}{more}], seed={self.seed})"


def check_comparable(s1: Sketch, s2: Sketch) -> None:
    if s1.seed != s2.seed:
        raise IncompatibleSketches(f"sketches use different permutations ({s1.seed} vs {s2.seed})")
    if s1.layout is not s2.layout and s1.layout != s2.layout:
        raise IncompatibleSketches("sketches use different bin layouts")


@dataclass(frozen=True)
class MinHashSketch:
    fingerprints: tuple[int, ...]
    seeds: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.fingerprints)


@dataclass(frozen=True)
class FilterParams:
    """Threshold ``T``, tolerance ``epsilon``, bins per group and (for GOPH) group count."""

    threshold: float = 0.7
    epsilon: float = 1e-4
    k_prime: int = 100
    n_groups: int = 10

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise InvalidArgument(f"threshold must be in (0, 1], got {self.threshold}")
        if not 0 < self.epsilon < 1:
            raise InvalidArgument(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.k_prime < 1 or self.n_groups < 1:
            raise InvalidArgument("k_prime and n_groups must be at least 1")


class Decision(enum.Enum):
    SIMILAR = "similar"
    NOT_SIMILAR = "not_similar"

    @classmethod
    def from_bool(cls, similar: bool) -> "Decision":
        return cls.SIMILAR if similar else cls.NOT_SIMILAR


@dataclass(frozen=True)
class ComparisonVerdict:
    decision: Decision
    groups_compared: int
    total_groups: int
    terminated_early: bool
    estimate: float | None = None

    def __post_init__(self):
        if self.terminated_early and self.groups_compared >= self.total_groups:
            raise InvalidArgument("an early termination must leave groups uncompared")
        if (self.estimate is None) != self.terminated_early:
            raise InvalidArgument("an estimate is attached exactly when every group was compared")

    @property
    def similar(self) -> bool:
        return self.decision is Decision.SIMILAR

"""k-permutation minwise hashing, the baseline the OPH variants are measured against."""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import (
    FeatureSet,
    IncompatibleSketches,
    InvalidArgument,
    MinHashSketch,
    UndefinedEstimate,
    permutation_generate,
)


def derive_seeds(seed: int, k: int) -> tuple[int, ...]:
    """``k`` distinct 64-bit seeds derived from one master seed."""
    state = np.random.SeedSequence(int(seed) & ((1 << 64) - 1)).generate_state(k, dtype=np.uint64)
    seeds = tuple(int(x) for x in state)
    if len(set(seeds)) != k:
        raise InvalidArgument("derived seeds collided; pick another master seed")
    return seeds


class MinHasher:
    """Holds ``k`` materialized permutations and sketches sets against them."""

    def __init__(self, seeds: Sequence[int], vocab_size: int):
        seeds = tuple(int(s) for s in seeds)
        if not seeds:
            raise InvalidArgument("at least one seed is required")
        if len(set(seeds)) != len(seeds):
            raise InvalidArgument("minhash seeds must be distinct")
        self.seeds = seeds
        self.vocab_size = int(vocab_size)
        # Row x holds pi_1(x), ..., pi_k(x): a set's rows are gathered contiguously.
        dtype = np.min_scalar_type(max(vocab_size - 1, 0))
        self.table = np.empty((vocab_size, len(seeds)), dtype=dtype)
        for j, s in enumerate(seeds):
            self.table[:, j] = permutation_generate(s, vocab_size).mapping

    @property
    def k(self) -> int:
        return len(self.seeds)

    def sketch(self, s: FeatureSet) -> MinHashSketch:
        if s.vocab_size != self.vocab_size:
            raise InvalidArgument(
                f"feature set vocabulary {s.vocab_size} does not match {self.vocab_size}"
            )
        if not len(s):
            raise UndefinedEstimate("cannot minhash an empty set")
        mins = self.table[s.ids].min(axis=0)
        return MinHashSketch(tuple(int(x) for x in mins.tolist()), self.seeds)


@lru_cache(maxsize=4)
def _hasher(seeds: tuple[int, ...], vocab_size: int) -> MinHasher:
    return MinHasher(seeds, vocab_size)


def minhash_sketch(s: FeatureSet, seeds: Sequence[int], vocab_size: int) -> MinHashSketch:
    """Fingerprint ``i`` is ``min(pi_i(s))`` with ``pi_i = permutation_generate(seeds[i], vocab_size)``."""
    return _hasher(tuple(int(x) for x in seeds), int(vocab_size)).sketch(s)


def minhash_estimate(a: MinHashSketch, b: MinHashSketch) -> float:
    if a.seeds != b.seeds:
        raise IncompatibleSketches("minhash sketches were built with different permutations")
    k = len(a.fingerprints)
    return sum(1 for x, y in zip(a.fingerprints, b.fingerprints) if x == y) / k

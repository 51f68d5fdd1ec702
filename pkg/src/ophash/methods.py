"""Uniform sketch-and-compare front for the four methods.

Detection and benchmarking both need "sketch a set" and "decide a pair" for
minhash, oph, goph and hoph; this module hides the per-method plumbing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .core import (
    FeatureSet,
    FilterParams,
    FlatBinLayout,
    InvalidArgument,
    Permutation,
    permutation_generate,
)
from .goph import GroupedSketchView, goph_compare
from .hoph import hoph_compare, hoph_layout, hoph_sketch
from .minhash import MinHasher, derive_seeds, minhash_estimate
from .oph import DEFAULT_MODE, EmptyBinMode, bin_match_stats, oph_estimate, oph_sketch

METHODS = ("minhash", "oph", "goph", "hoph")


@dataclass(frozen=True)
class SketchConfig:
    """How sketches are built.

    ``k`` is the flat bin count for oph and the permutation count for minhash;
    it defaults to ``n_groups * k_prime`` so every method looks at the same
    number of bins.
    """

    k: int | None = None
    k_prime: int = 100
    n_groups: int = 10
    ratio: tuple[int, int] = (1, 1)
    seed: int = 0
    identity_perm: bool = False
    mode: EmptyBinMode = DEFAULT_MODE

    @property
    def flat_bins(self) -> int:
        return self.k if self.k is not None else self.n_groups * self.k_prime


@dataclass(frozen=True)
class PairOutcome:
    similar: bool
    estimate: float | None
    groups_compared: int | None
    bins_compared: int


class Method:
    """Sketcher plus pair decision rule for one method over one vocabulary."""

    def __init__(self, name: str, vocab_size: int, params: FilterParams, config: SketchConfig):
        if name not in METHODS:
            raise InvalidArgument(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
        self.name = name
        self.vocab_size = vocab_size
        self.params = params
        self.config = config
        self._perm: Permutation | None = None
        self._hasher: MinHasher | None = None
        if name == "minhash":
            if config.identity_perm:
                raise InvalidArgument("minhash needs distinct permutations; identity is not allowed")
            self._hasher = MinHasher(derive_seeds(config.seed, config.flat_bins), vocab_size)
            return
        self._perm = (
            Permutation.identity(vocab_size)
            if config.identity_perm
            else permutation_generate(config.seed, vocab_size)
        )
        if name == "hoph":
            a, b = config.ratio
            self.layout = hoph_layout(vocab_size, a, b, config.k_prime)
        elif name == "goph":
            self.layout = FlatBinLayout(vocab_size, config.n_groups * config.k_prime)
        else:
            self.layout = FlatBinLayout(vocab_size, config.flat_bins)
        if name == "goph":
            self.params = FilterParams(params.threshold, params.epsilon, config.k_prime, config.n_groups)

    def sketch(self, s: FeatureSet) -> Any:
        if self._hasher is not None:
            return self._hasher.sketch(s)
        if self.name == "hoph":
            return hoph_sketch(s, self._perm, self.layout)
        sk = oph_sketch(s, self._perm, self.layout)
        if self.name == "goph":
            return GroupedSketchView(sk, self.config.n_groups, self.config.k_prime)
        return sk

    def compare(self, a: Any, b: Any) -> PairOutcome:
        T = self.params.threshold
        if self.name == "minhash":
            est = minhash_estimate(a, b)
            return PairOutcome(est >= T, est, None, len(a))
        if self.name == "oph":
            est = oph_estimate(bin_match_stats(a, b, self.config.mode))
            return PairOutcome(est >= T, est, None, self.layout.k)
        if self.name == "goph":
            verdict, _ = goph_compare(a, b, self.params, self.config.mode)
        else:
            verdict, _ = hoph_compare(a, b, self.params, self.config.mode)
        return PairOutcome(
            verdict.similar,
            verdict.estimate,
            verdict.groups_compared,
            verdict.groups_compared * self.config.k_prime,
        )

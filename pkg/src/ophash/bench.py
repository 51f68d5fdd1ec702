"""Pairwise workloads and per-method timing/work measurements."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FeatureSet, FilterParams
from .corpus import exact_jaccard, gen_pair
from .methods import Method, SketchConfig


@dataclass(frozen=True)
class LabeledPair:
    a: FeatureSet
    b: FeatureSet
    jaccard: float


def pair_workload(
    n_pairs: int,
    vocab_size: int = 1 << 16,
    set_size: int = 8192,
    seed: int = 0,
    jaccard_range: tuple[float, float] = (0.0, 1.0),
) -> list[LabeledPair]:
    """``n_pairs`` pairs with target Jaccard drawn uniformly from ``jaccard_range``.

    The recorded ``jaccard`` is the exact similarity of the drawn pair, which
    differs from the target only by rounding of the intersection size.
    """
    rng = np.random.default_rng(seed)
    out = []
    for J in rng.uniform(*jaccard_range, size=n_pairs):
        a, b = gen_pair(set_size, float(J), vocab_size, rng)
        out.append(LabeledPair(a, b, exact_jaccard(a, b)))
    return out


@dataclass(frozen=True)
class MethodRun:
    method: str
    similar: np.ndarray
    estimates: list[float | None]
    groups_compared: np.ndarray
    bins_compared: np.ndarray
    sketch_seconds: float
    compare_seconds: float

    @property
    def seconds(self) -> float:
        return self.sketch_seconds + self.compare_seconds


def _chunks(n: int, size: int):
    for i in range(0, n, size):
        yield slice(i, min(n, i + size))


def run_methods(
    pairs: Sequence[LabeledPair],
    methods: Sequence[str],
    params: FilterParams = FilterParams(),
    config: SketchConfig = SketchConfig(),
    chunk: int = 200,
) -> dict[str, MethodRun]:
    """Sketch both sides of every pair and decide it, for each method.

    Methods are run round-robin over chunks of ``chunk`` pairs, rotating the
    order each chunk, so slow drift in machine speed is shared evenly rather
    than landing on whichever method happened to run last.  Engine setup
    (permutation generation) counts as sketching time.
    """
    vocab = pairs[0].a.vocab_size if pairs else 1
    engines: dict[str, Method] = {}
    sketch_t = {m: 0.0 for m in methods}
    compare_t = {m: 0.0 for m in methods}
    outcomes: dict[str, list] = {m: [] for m in methods}
    for m in methods:
        t0 = time.perf_counter()
        engines[m] = Method(m, vocab, params, config)
        sketch_t[m] += time.perf_counter() - t0
    for c, sl in enumerate(_chunks(len(pairs), chunk)):
        part = pairs[sl]
        for j in range(len(methods)):
            m = methods[(c + j) % len(methods)]
            engine = engines[m]
            t0 = time.perf_counter()
            sketches = [(engine.sketch(p.a), engine.sketch(p.b)) for p in part]
            t1 = time.perf_counter()
            outcomes[m].extend(engine.compare(x, y) for x, y in sketches)
            t2 = time.perf_counter()
            sketch_t[m] += t1 - t0
            compare_t[m] += t2 - t1
    return {
        m: MethodRun(
            method=m,
            similar=np.array([o.similar for o in outcomes[m]], dtype=bool),
            estimates=[o.estimate for o in outcomes[m]],
            groups_compared=np.array([o.groups_compared or 0 for o in outcomes[m]]),
            bins_compared=np.array([o.bins_compared for o in outcomes[m]]),
            sketch_seconds=sketch_t[m],
            compare_seconds=compare_t[m],
        )
        for m in methods
    }


def run_method(
    pairs: Sequence[LabeledPair],
    method: str,
    params: FilterParams = FilterParams(),
    config: SketchConfig = SketchConfig(),
) -> MethodRun:
    return run_methods(pairs, [method], params, config)[method]


def agreement(run: MethodRun, reference: MethodRun) -> float:
    return float(np.mean(run.similar == reference.similar)) if run.similar.size else 1.0

"""Corpora of feature sets: ingestion, synthetic generation, ground truth and detection.

Feature-set files are UTF-8 text::

    #vocab_size=65536
    doc0001<TAB>3 17 905 ...

one document per line with ascending integer IDs.
"""

from __future__ import annotations

import hashlib
import logging
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import FeatureSet, FilterParams, InvalidArgument, UndefinedEstimate
from .methods import Method, SketchConfig

log = logging.getLogger(__name__)


class CorpusFormatError(InvalidArgument):
    """A malformed line in a feature-set, sketch or query file."""

    def __init__(self, path: str | Path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


@dataclass(frozen=True)
class Corpus:
    documents: tuple[tuple[str, FeatureSet], ...]
    vocab_size: int

    def __post_init__(self):
        seen = set()
        for doc_id, fs in self.documents:
            if doc_id in seen:
                raise InvalidArgument(f"duplicate document id {doc_id!r}")
            if fs.vocab_size != self.vocab_size:
                raise InvalidArgument(f"document {doc_id!r} has vocabulary {fs.vocab_size}, not {self.vocab_size}")
            seen.add(doc_id)

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def ids(self) -> list[str]:
        return [d for d, _ in self.documents]

    def as_dict(self) -> dict[str, FeatureSet]:
        return dict(self.documents)

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(format_corpus(self))

    @classmethod
    def read(cls, path: str | Path) -> "Corpus":
        with open(path, encoding="utf-8") as fh:
            return parse_corpus(fh, path)


def format_corpus(corpus: Corpus) -> str:
    lines = [f"#vocab_size={corpus.vocab_size}"]
    for doc_id, fs in corpus.documents:
        lines.append(f"{doc_id}\t{' '.join(map(str, fs.ids.tolist()))}")
    return "\n".join(lines) + "\n"


def parse_corpus(lines: Iterable[str], source: str | Path = "<corpus>") -> Corpus:
    vocab_size = None
    docs: list[tuple[str, FeatureSet]] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n\r")
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            if key.strip() == "vocab_size":
                try:
                    vocab_size = int(value)
                except ValueError:
                    raise CorpusFormatError(source, lineno, f"bad vocab_size {value!r}") from None
                if vocab_size < 1:
                    raise CorpusFormatError(source, lineno, "vocab_size must be positive")
            continue
        if vocab_size is None:
            raise CorpusFormatError(source, lineno, "missing '#vocab_size=<N>' header before data")
        doc_id, tab, rest = line.partition("\t")
        if not tab or not doc_id:
            raise CorpusFormatError(source, lineno, "expected 'doc_id<TAB>ids'")
        if doc_id in seen:
            raise CorpusFormatError(source, lineno, f"duplicate document id {doc_id!r}")
        try:
            ids = [int(t) for t in rest.split()]
        except ValueError:
            raise CorpusFormatError(source, lineno, "feature ids must be integers") from None
        try:
            fs = FeatureSet(ids, vocab_size)
        except InvalidArgument as exc:
            raise CorpusFormatError(source, lineno, str(exc)) from None
        seen.add(doc_id)
        docs.append((doc_id, fs))
    if vocab_size is None:
        raise CorpusFormatError(source, 1, "missing '#vocab_size=<N>' header")
    return Corpus(tuple(docs), vocab_size)


def read_visual_words(path: str | Path, vocab_size: int | None = None) -> Corpus:
    """Load precomputed visual-word IDs, one image per line.

    A line is either ``image_id<TAB>w1 w2 ...`` or bare ``w1 w2 ...`` (the
    image is then named by its line number).  Repeated words collapse to a set.
    Without ``vocab_size`` the vocabulary is one past the largest word seen.
    """
    rows: list[tuple[str, list[int]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            name, tab, rest = raw.rstrip("\n\r").partition("\t")
            if not tab:
                name, rest = f"img{lineno:06d}", line
            try:
                rows.append((name, [int(t) for t in rest.split()]))
            except ValueError:
                raise CorpusFormatError(path, lineno, "visual words must be integers") from None
    if vocab_size is None:
        vocab_size = 1 + max((max(w) for _, w in rows if w), default=0)
    docs = []
    for name, words in rows:
        if any(w < 0 or w >= vocab_size for w in words):
            raise InvalidArgument(f"image {name!r} has a visual word outside [0, {vocab_size})")
        docs.append((name, FeatureSet.from_items(words, vocab_size)))
    return Corpus(tuple(docs), vocab_size)


def stable_hash64(text: str, seed: int = 0) -> int:
    key = (int(seed) & ((1 << 64) - 1)).to_bytes(8, "little")
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8, key=key).digest(), "little")


def shingles(text: str, w: int) -> set[str]:
    if w < 1:
        raise InvalidArgument("shingle width must be at least 1")
    tokens = text.lower().split()
    return {" ".join(tokens[i : i + w]) for i in range(len(tokens) - w + 1)}


def shingle_text(text: str, w: int, vocab_size: int, seed: int = 0) -> FeatureSet:
    """Lowercased whitespace ``w``-grams, hashed and reduced modulo ``vocab_size``."""
    return FeatureSet.from_items((stable_hash64(s, seed) % vocab_size for s in shingles(text, w)), vocab_size)


def text_corpus(texts: dict[str, str] | Sequence[tuple[str, str]], w: int, vocab_size: int, seed: int = 0) -> Corpus:
    items = texts.items() if isinstance(texts, dict) else texts
    return Corpus(tuple((doc_id, shingle_text(t, w, vocab_size, seed)) for doc_id, t in items), vocab_size)


def exact_jaccard(a: FeatureSet, b: FeatureSet) -> float:
    if a.vocab_size != b.vocab_size:
        raise InvalidArgument("feature sets come from different vocabularies")
    if not len(a) and not len(b):
        raise UndefinedEstimate("Jaccard similarity of two empty sets is undefined")
    inter = np.intersect1d(a.ids, b.ids, assume_unique=True).size
    return inter / (len(a) + len(b) - inter)


class JaccardIndex:
    """Exact Jaccard of one query against every document at once."""

    def __init__(self, sets: Sequence[FeatureSet], vocab_size: int):
        self.vocab_size = vocab_size
        self.sizes = np.array([len(s) for s in sets], dtype=np.int64)
        self.owner = np.repeat(np.arange(len(sets)), self.sizes)
        self.flat = np.concatenate([s.ids for s in sets]) if sets else np.empty(0, np.int64)

    def against(self, query: FeatureSet) -> np.ndarray:
        mask = np.zeros(self.vocab_size, dtype=bool)
        mask[query.ids] = True
        inter = np.bincount(self.owner, weights=mask[self.flat], minlength=self.sizes.size)
        union = self.sizes + len(query) - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(union > 0, inter / np.maximum(union, 1), np.nan)


def intersection_size(s: int, J: float) -> int:
    return int(math.floor(2 * s * J / (1 + J) + 0.5))


def gen_pair(s: int, J: float, vocab_size: int, seed: int | np.random.Generator) -> tuple[FeatureSet, FeatureSet]:
    """Two ``s``-element sets sharing ``round(2sJ/(1+J))`` elements."""
    if s < 0 or not 0 <= J <= 1:
        raise InvalidArgument(f"need s >= 0 and J in [0, 1], got s={s}, J={J}")
    i = intersection_size(s, J)
    if not 0 <= i <= s or 2 * s - i > vocab_size:
        raise InvalidArgument(f"cannot draw two {s}-sets with {i} shared from a vocabulary of {vocab_size}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pool = rng.choice(vocab_size, size=2 * s - i, replace=False)
    common, only_a, only_b = pool[:i], pool[i:s], pool[s:]
    a = FeatureSet(np.sort(np.concatenate([common, only_a])), vocab_size)
    b = FeatureSet(np.sort(np.concatenate([common, only_b])), vocab_size)
    return a, b


def gen_corpus(
    docs: int,
    size: int,
    pairs: int,
    jaccard: float | tuple[float, float],
    vocab_size: int,
    seed: int = 0,
) -> Corpus:
    """``docs`` random ``size``-sets, ``pairs`` of which are planted near-duplicate pairs.

    ``jaccard`` is a fixed similarity for the planted pairs or a ``(lo, hi)``
    range to draw each pair's similarity from uniformly.  Document order is
    shuffled so any prefix mixes planted and background documents.
    """
    if docs < 1 or size < 0 or pairs < 0:
        raise InvalidArgument("docs must be positive; size and pairs non-negative")
    if 2 * pairs > docs:
        raise InvalidArgument(f"{pairs} planted pairs need {2 * pairs} documents, only {docs} requested")
    if size > vocab_size:
        raise InvalidArgument("set size exceeds the vocabulary")
    rng = np.random.default_rng(seed)
    sets: list[FeatureSet] = []
    for _ in range(pairs):
        J = jaccard if not isinstance(jaccard, tuple) else rng.uniform(*jaccard)
        sets.extend(gen_pair(size, float(J), vocab_size, rng))
    for _ in range(docs - 2 * pairs):
        sets.append(FeatureSet(np.sort(rng.choice(vocab_size, size=size, replace=False)), vocab_size))
    order = rng.permutation(docs)
    width = len(str(docs - 1))
    return Corpus(tuple((f"doc{n:0{width}d}", sets[i]) for n, i in enumerate(order)), vocab_size)


def read_queries(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


@dataclass(frozen=True)
class PairRecord:
    query_id: str
    candidate_id: str
    similar: bool
    estimate: float | None
    groups_compared: int | None
    bins_compared: int


@dataclass(frozen=True)
class DetectionReport:
    method: str
    params: FilterParams
    config: SketchConfig
    query_ids: tuple[str, ...]
    retrieved: tuple[PairRecord, ...]
    ground_truth: tuple[tuple[str, str], ...]
    pairs_compared: int
    true_positives: int
    mean_groups_compared: float | None
    mean_bins_compared: float
    sketch_seconds: float
    compare_seconds: float

    @property
    def precision(self) -> float:
        # Nothing retrieved means nothing wrong was retrieved.
        return self.true_positives / len(self.retrieved) if self.retrieved else 1.0

    @property
    def recall(self) -> float:
        return self.true_positives / len(self.ground_truth) if self.ground_truth else 1.0

    @property
    def seconds(self) -> float:
        return self.sketch_seconds + self.compare_seconds

    def summary(self) -> dict[str, object]:
        return {
            "method": self.method,
            "mode": self.config.mode.value,
            "threshold": self.params.threshold,
            "epsilon": self.params.epsilon,
            "queries": len(self.query_ids),
            "pairs_compared": self.pairs_compared,
            "retrieved": len(self.retrieved),
            "ground_truth": len(self.ground_truth),
            "true_positives": self.true_positives,
            "precision": self.precision,
            "recall": self.recall,
            "mean_groups_compared": self.mean_groups_compared,
            "mean_bins_compared": self.mean_bins_compared,
        }

    def to_text(self, include_timing: bool = True) -> str:
        """Key-sorted report: ``#key=value`` summary lines, then one TSV row per retrieved pair."""
        summary = self.summary()
        if include_timing:
            summary["sketch_seconds"] = round(self.sketch_seconds, 6)
            summary["compare_seconds"] = round(self.compare_seconds, 6)
        lines = [f"#{k}={_fmt(v)}" for k, v in sorted(summary.items())]
        lines.append("query_id\tcandidate_id\tdecision\testimate\tgroups_compared")
        for r in self.retrieved:
            lines.append(
                "\t".join(
                    [
                        r.query_id,
                        r.candidate_id,
                        "similar" if r.similar else "not_similar",
                        _fmt(r.estimate),
                        _fmt(r.groups_compared),
                    ]
                )
            )
        return "\n".join(lines) + "\n"


def _fmt(v: object) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)


# Shared with forked workers; set only for the duration of one detect() call.
_WORK: dict = {}


def _compare_queries(query_positions: Sequence[int]) -> list[PairRecord]:
    method: Method = _WORK["method"]
    ids, sketches = _WORK["ids"], _WORK["sketches"]
    out = []
    for qi in query_positions:
        qs = sketches[qi]
        for ci, cs in enumerate(sketches):
            if ci == qi:
                continue
            o = method.compare(qs, cs)
            out.append(PairRecord(ids[qi], ids[ci], o.similar, o.estimate, o.groups_compared, o.bins_compared))
    return out


def detect(
    corpus: Corpus,
    query_ids: Sequence[str],
    method: str,
    params: FilterParams = FilterParams(),
    config: SketchConfig = SketchConfig(),
    workers: int = 1,
) -> DetectionReport:
    """Compare each query with every other document and score against exact Jaccard.

    Empty documents are skipped: they have no sketch content and no defined
    similarity to one another.  Results do not depend on ``workers``.
    """
    docs = corpus.as_dict()
    missing = [q for q in query_ids if q not in docs]
    if missing:
        raise InvalidArgument(f"query ids not in corpus: {', '.join(missing[:5])}")
    if len(set(query_ids)) != len(query_ids):
        raise InvalidArgument("query ids must be unique")
    engine = Method(method, corpus.vocab_size, params, config)

    kept = [(d, fs) for d, fs in corpus.documents if len(fs)]
    if len(kept) < len(corpus):
        log.warning("skipping %d empty documents", len(corpus) - len(kept))
    ids = [d for d, _ in kept]
    position = {d: i for i, d in enumerate(ids)}
    queries = [q for q in query_ids if q in position]

    t0 = time.perf_counter()
    sketches = [engine.sketch(fs) for _, fs in kept]
    t1 = time.perf_counter()
    _WORK.update(method=engine, ids=ids, sketches=sketches)
    try:
        qpos = [position[q] for q in queries]
        if workers > 1 and len(qpos) > 1:
            chunks = [qpos[i::workers] for i in range(workers)]
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                records = [r for part in pool.map(_compare_queries, chunks) for r in part]
        else:
            records = _compare_queries(qpos)
    finally:
        _WORK.clear()
    t2 = time.perf_counter()

    index = JaccardIndex([fs for _, fs in kept], corpus.vocab_size)
    truth: list[tuple[str, str]] = []
    for q in queries:
        sims = index.against(docs[q])
        sims[position[q]] = -1.0
        truth.extend((q, ids[i]) for i in np.flatnonzero(sims >= params.threshold))
    truth.sort()
    truth_set = set(truth)

    records.sort(key=lambda r: (r.query_id, r.candidate_id))
    retrieved = tuple(r for r in records if r.similar)
    tp = sum(1 for r in retrieved if (r.query_id, r.candidate_id) in truth_set)
    groups = [r.groups_compared for r in records if r.groups_compared is not None]
    return DetectionReport(
        method=method,
        params=params,
        config=config,
        query_ids=tuple(queries),
        retrieved=retrieved,
        ground_truth=tuple(truth),
        pairs_compared=len(records),
        true_positives=tp,
        mean_groups_compared=float(np.mean(groups)) if groups else None,
        mean_bins_compared=float(np.mean([r.bins_compared for r in records])) if records else 0.0,
        sketch_seconds=t1 - t0,
        compare_seconds=t2 - t1,
    )

"""One permutation hashing (OPH) and its grouped (GOPH) and hierarchical (HOPH)
variants, with binomial early-termination filtering for near-duplicate detection."""

from .binomial import BinomialModel, lower_tail, upper_tail
from .core import (
    EMPTY,
    ComparisonVerdict,
    Decision,
    FeatureSet,
    FilterParams,
    FlatBinLayout,
    HierarchicalBinLayout,
    IncompatibleSketches,
    InvalidArgument,
    MinHashSketch,
    Permutation,
    Sketch,
    UndefinedEstimate,
    permutation_apply,
    permutation_generate,
)
from .corpus import (
    Corpus,
    CorpusFormatError,
    DetectionReport,
    detect,
    exact_jaccard,
    gen_corpus,
    gen_pair,
    read_visual_words,
    shingle_text,
)
from .goph import FilterTrace, GroupedSketchView, goph_compare, match_counts_filter
from .hoph import (
    hoph_aggregate_empty,
    hoph_aggregate_matched,
    hoph_compare,
    hoph_estimate,
    hoph_layout,
    hoph_lemma_estimate,
    hoph_sketch,
)
from .methods import METHODS, Method, SketchConfig
from .minhash import MinHasher, derive_seeds, minhash_estimate, minhash_sketch
from .oph import (
    BinMatchStats,
    EmptyBinMode,
    bin_match_stats,
    oph_estimate,
    oph_similarity,
    oph_sketch,
    oph_variance_mc,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ophash.core import (
    EMPTY,
    ComparisonVerdict,
    Decision,
    FeatureSet,
    FilterParams,
    FlatBinLayout,
    HierarchicalBinLayout,
    IncompatibleSketches,
    InvalidArgument,
    Permutation,
    Sketch,
    check_comparable,
    permutation_apply,
    permutation_generate,
)


@st.composite
def sets_in_vocab(draw, max_vocab=300):
    vocab = draw(st.integers(1, max_vocab))
    ids = draw(st.sets(st.integers(0, vocab - 1), max_size=min(vocab, 60)))
    return FeatureSet(sorted(ids), vocab)


class TestFeatureSet:
    def test_accepts_sorted_unique_ids(self):
        fs = FeatureSet([1, 2, 5], 17)
        assert list(fs) == [1, 2, 5] and len(fs) == 3 and 5 in fs and 4 not in fs

    def test_may_be_empty(self):
        assert len(FeatureSet([], 4)) == 0

    @pytest.mark.parametrize("ids", [[3, 1], [1, 1], [-1, 2], [0, 17]])
    def test_rejects_bad_ids(self, ids):
        with pytest.raises(InvalidArgument):
            FeatureSet(ids, 17)

    def test_from_items_dedupes_and_sorts(self):
        assert FeatureSet.from_items([5, 1, 5, 2], 10) == FeatureSet([1, 2, 5], 10)

    def test_ids_are_read_only(self):
        fs = FeatureSet([1, 2], 5)
        with pytest.raises(ValueError):
            fs.ids[0] = 3

    def test_equality_includes_vocabulary(self):
        assert FeatureSet([1], 5) != FeatureSet([1], 6)
        assert hash(FeatureSet([1, 3], 5)) == hash(FeatureSet([1, 3], 5))


class TestPermutation:
    def test_size_one_is_identity(self):
        for seed in (0, 1, 2**63 + 5):
            assert permutation_generate(seed, 1).mapping.tolist() == [0]

    def test_is_bijection(self):
        p = permutation_generate(7, 17)
        assert sorted(p.mapping.tolist()) == list(range(17))

    def test_same_seed_same_mapping(self):
        assert np.array_equal(permutation_generate(42, 17).mapping, permutation_generate(42, 17).mapping)

    def test_seeds_differ(self):
        assert not np.array_equal(permutation_generate(1, 1000).mapping, permutation_generate(2, 1000).mapping)

    def test_zero_size_rejected(self):
        with pytest.raises(InvalidArgument):
            permutation_generate(3, 0)

    def test_identity(self):
        p = Permutation.identity(5)
        assert p.mapping.tolist() == [0, 1, 2, 3, 4] and p.seed is None
        assert permutation_apply(p, FeatureSet([1, 2, 4], 5)) == FeatureSet([1, 2, 4], 5)

    def test_apply_empty(self):
        assert len(permutation_apply(permutation_generate(3, 9), FeatureSet([], 9))) == 0

    def test_apply_size_mismatch(self):
        with pytest.raises(InvalidArgument):
            permutation_apply(permutation_generate(3, 9), FeatureSet([1], 10))

    @settings(max_examples=60, deadline=None)
    @given(sets_in_vocab(), st.integers(0, 2**64 - 1))
    def test_apply_then_inverse_roundtrips(self, fs, seed):
        p = permutation_generate(seed, fs.vocab_size)
        image = permutation_apply(p, fs)
        assert len(image) == len(fs)
        back = np.sort(p.inverse()[image.ids])
        assert back.tolist() == fs.ids.tolist()

    def test_call(self):
        p = permutation_generate(11, 20)
        assert [p(i) for i in range(20)] == p.mapping.tolist()


class TestLayouts:
    def test_example_boundaries(self):
        assert FlatBinLayout(17, 4).boundaries.tolist() == [0, 4, 8, 12, 17]

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 5000), st.data())
    def test_flat_bins_partition(self, vocab, data):
        k = data.draw(st.integers(1, vocab))
        edges = FlatBinLayout(vocab, k).boundaries
        assert edges[0] == 0 and edges[-1] == vocab and len(edges) == k + 1
        assert np.all(np.diff(edges) >= 1)
        assert np.all(edges == (np.arange(k + 1) * vocab) // k)

    def test_flat_rejects_too_many_bins(self):
        with pytest.raises(InvalidArgument):
            FlatBinLayout(3, 4)
        with pytest.raises(InvalidArgument):
            FlatBinLayout(3, 0)

    def test_hierarchical_validates_groups(self):
        HierarchicalBinLayout(17, 1, 1, 2, ((0, 8), (8, 4), (12, 5)))
        with pytest.raises(InvalidArgument):
            HierarchicalBinLayout(17, 1, 1, 2, ((0, 8), (9, 8)))
        with pytest.raises(InvalidArgument):
            HierarchicalBinLayout(17, 1, 1, 2, ((0, 8), (8, 4)))
        with pytest.raises(InvalidArgument):
            HierarchicalBinLayout(17, 1, 1, 5, ((0, 8), (8, 4), (12, 5)))

    def test_hierarchical_boundaries(self):
        layout = HierarchicalBinLayout(17, 1, 1, 2, ((0, 8), (8, 4), (12, 5)))
        assert layout.boundaries.tolist() == [0, 4, 8, 10, 12, 14, 17]
        assert layout.total_bins == 6 and layout.ratio == 0.5
        assert layout.group_bins(1) == slice(2, 4)


class TestSketchAndParams:
    def test_length_must_match_layout(self):
        with pytest.raises(InvalidArgument):
            Sketch(FlatBinLayout(17, 4), (0, 0, 0), None)

    def test_repr_marks_empty(self):
        assert "⊗" in repr(Sketch(FlatBinLayout(17, 4), (2, EMPTY, 1, 0), None))

    def test_comparability(self):
        layout = FlatBinLayout(17, 4)
        a = Sketch(layout, (0, 0, 0, 0), 1)
        check_comparable(a, Sketch(FlatBinLayout(17, 4), (0, 0, 0, 0), 1))
        with pytest.raises(IncompatibleSketches):
            check_comparable(a, Sketch(layout, (0, 0, 0, 0), 2))
        with pytest.raises(IncompatibleSketches):
            check_comparable(a, Sketch(FlatBinLayout(16, 4), (0, 0, 0, 0), 1))

    def test_filter_defaults(self):
        p = FilterParams()
        assert (p.threshold, p.epsilon, p.k_prime, p.n_groups) == (0.7, 1e-4, 100, 10)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(threshold=0), dict(threshold=1.1), dict(epsilon=0), dict(epsilon=1), dict(k_prime=0), dict(n_groups=0)],
    )
    def test_filter_validation(self, kwargs):
        with pytest.raises(InvalidArgument):
            FilterParams(**kwargs)

    def test_verdict_invariants(self):
        ComparisonVerdict(Decision.SIMILAR, 3, 10, True)
        ComparisonVerdict(Decision.NOT_SIMILAR, 10, 10, False, 0.2)
        with pytest.raises(InvalidArgument):
            ComparisonVerdict(Decision.SIMILAR, 10, 10, True)
        with pytest.raises(InvalidArgument):
            ComparisonVerdict(Decision.SIMILAR, 10, 10, False)
        with pytest.raises(InvalidArgument):
            ComparisonVerdict(Decision.SIMILAR, 2, 10, True, 0.9)

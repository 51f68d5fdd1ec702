import numpy as np
import pytest

from ophash.bench import agreement, pair_workload, run_method, run_methods
from ophash.core import FilterParams, InvalidArgument
from ophash.methods import METHODS, Method, SketchConfig


def test_unknown_method():
    with pytest.raises(InvalidArgument):
        Method("lsh", 1000, FilterParams(), SketchConfig())


def test_minhash_needs_real_permutations():
    with pytest.raises(InvalidArgument):
        Method("minhash", 1000, FilterParams(), SketchConfig(identity_perm=True))


def test_goph_layout_follows_groups():
    m = Method("goph", 5000, FilterParams(k_prime=100, n_groups=10), SketchConfig(k=37, k_prime=20, n_groups=5))
    assert m.layout.k == 100 and (m.params.k_prime, m.params.n_groups) == (20, 5)


def test_flat_bins_default():
    assert SketchConfig().flat_bins == 1000 and SketchConfig(k=64).flat_bins == 64


def test_workload_and_runs():
    pairs = pair_workload(30, vocab_size=4096, set_size=512, seed=1)
    assert all(len(p.a) == len(p.b) == 512 for p in pairs)
    assert pair_workload(30, vocab_size=4096, set_size=512, seed=1)[7].a == pairs[7].a
    runs = run_methods(pairs, list(METHODS), FilterParams(), SketchConfig(k_prime=20, n_groups=5), chunk=7)
    for m in METHODS:
        assert runs[m].similar.shape == (30,)
        assert runs[m].sketch_seconds > 0 and runs[m].compare_seconds > 0
    assert np.all(runs["oph"].bins_compared == 100)
    assert agreement(runs["oph"], runs["oph"]) == 1.0
    single = run_method(pairs, "goph", FilterParams(), SketchConfig(k_prime=20, n_groups=5))
    assert np.array_equal(single.similar, runs["goph"].similar)

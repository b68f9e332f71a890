import numpy as np
import pytest
import scipy.sparse
from hypothesis import given, settings, strategies as st

import spectral_approx.approx as approx
from spectral_approx.approx import (
    SampleSpec,
    budget_from_fraction,
    budget_matrix,
    budget_sc,
    espec,
    fast_sc,
    nystrom_decompose,
    nystrom_factors,
    nystrom_sc,
    pair_count,
    sample_pairs,
)
from spectral_approx.datasets import ShapeSpec, gen_synthetic
from spectral_approx.exact import spectral_cluster
from spectral_approx.metrics import misclustering_rate
from spectral_approx.similarity import KernelSpec, build_similarity


def blobs(n, seed, gap=6.0):
    rng = np.random.default_rng(seed)
    a = n // 2
    X = np.vstack([rng.normal(size=(a, 2)), rng.normal(size=(n - a, 2)) + [gap, 0.0]])
    return X, np.repeat([0, 1], [a, n - a])


class TestSampleSpec:
    def test_size_rounding(self):
        assert SampleSpec(0.15).size(200) == 30
        assert SampleSpec(0.1).size(373) == 38
        assert SampleSpec(1.0).size(7) == 7

    def test_too_small(self):
        with pytest.raises(ValueError):
            SampleSpec(0.01).size(50)

    @pytest.mark.parametrize("fraction", [0.0, 1.5, -0.2])
    def test_bad_fraction(self, fraction):
        with pytest.raises(ValueError):
            SampleSpec(fraction)

    def test_draw(self):
        idx = SampleSpec(0.3, seed=4).draw(100)
        assert idx.size == 30 and np.all(np.diff(idx) > 0)
        np.testing.assert_array_equal(idx, SampleSpec(0.3, seed=4).draw(100))


class TestFastSC:
    def test_k_equals_n(self):
        for seed in range(3):
            X = gen_synthetic(ShapeSpec("half-rings", n=120, seed=seed)).values
            np.testing.assert_array_equal(fast_sc(X, 120, seed=seed), spectral_cluster(X))

    def test_blobs_four_representatives(self):
        X, truth = blobs(100, 1, gap=10.0)
        assert misclustering_rate(truth, fast_sc(X, 4, seed=0, kernel=KernelSpec.self_tuned(1))) == 0

    def test_strips_twenty_percent(self):
        data = gen_synthetic(ShapeSpec("gaussian-strips", seed=0))
        ref = spectral_cluster(data.values)
        assert misclustering_rate(ref, fast_sc(data.values, 40, seed=0)) == 0

    def test_bad_k(self):
        with pytest.raises(ValueError):
            fast_sc(np.zeros((5, 2)), 1)


class TestEspec:
    def test_full_sample_is_exact(self):
        X = gen_synthetic(ShapeSpec("concentric-rings", n=200, seed=2)).values
        np.testing.assert_array_equal(espec(X, SampleSpec(1.0, seed=5)), spectral_cluster(X))

    def test_strips_thirty_percent(self):
        data = gen_synthetic(ShapeSpec("gaussian-strips", seed=0))
        ref = spectral_cluster(data.values)
        assert misclustering_rate(ref, espec(data.values, SampleSpec(0.3, seed=0))) == 0

    def _vote_case(self, monkeypatch, sample_labels, m):
        # the single point left out of a 4-of-5 sample sits at 0; sample points at 1, 2, 3, 100
        sample = SampleSpec(0.8, seed=0)
        left_out = int(np.setdiff1d(np.arange(5), sample.draw(5))[0])
        X = np.empty((5, 1))
        X[left_out] = 0.0
        X[np.setdiff1d(np.arange(5), [left_out]), 0] = [1.0, 2.0, 3.0, 100.0]
        table = dict(zip([1.0, 2.0, 3.0, 100.0], sample_labels))
        monkeypatch.setattr(approx, "spectral_cluster", lambda Xs, kernel: np.array([table[x] for x in Xs[:, 0]]))
        return espec(X, sample, m=m)[left_out]

    def test_majority_vote(self, monkeypatch):
        assert self._vote_case(monkeypatch, [1, 1, 0, 0], m=3) == 1
        assert self._vote_case(monkeypatch, [0, 1, 1, 0], m=3) == 1
        assert self._vote_case(monkeypatch, [1, 0, 0, 1], m=3) == 0

    def test_tie_goes_to_nearest(self, monkeypatch):
        assert self._vote_case(monkeypatch, [0, 1, 1, 1], m=2) == 0
        assert self._vote_case(monkeypatch, [1, 0, 0, 0], m=2) == 1

    def test_bad_m(self):
        X, _ = blobs(20, 0)
        with pytest.raises(ValueError):
            espec(X, SampleSpec(0.5), m=11)


class TestNystrom:
    def test_low_rank_reconstruction(self):
        rng = np.random.default_rng(0)
        Z = rng.normal(size=(30, 3))
        W = Z @ Z.T
        f = nystrom_decompose(W[:, :3], 3)
        assert np.max(np.abs(f.reconstruct() - W)) <= 1e-8

    def test_orthonormal_vectors(self):
        X, _ = blobs(200, 2)
        landmarks = SampleSpec(0.1, seed=1).draw(200)
        for normalize in (False, True):
            f, _ = nystrom_factors(X, landmarks, KernelSpec.fixed(1.0), normalize=normalize)
            G = f.V.T @ f.V
            assert np.max(np.abs(G - np.eye(G.shape[0]))) <= 1e-6

    def test_normalized_degrees(self):
        X, _ = blobs(60, 3)
        landmarks = SampleSpec(0.5, seed=0).draw(60)
        f, perm = nystrom_factors(X, landmarks, KernelSpec.fixed(1.0), normalize=False)
        g, _ = nystrom_factors(X, landmarks, KernelSpec.fixed(1.0), normalize=True)
        np.testing.assert_allclose(g.degrees, f.reconstruct().sum(axis=1), rtol=1e-8)

    @pytest.mark.parametrize("kernel", [KernelSpec.fixed(0.5), KernelSpec.psd_self_tuned(7)])
    def test_full_sample_is_exact(self, kernel):
        for seed in range(3):
            X = gen_synthetic(ShapeSpec("gaussian-strips", n=150, seed=seed)).values
            got = nystrom_sc(X, SampleSpec(1.0, seed=seed), kernel)
            assert misclustering_rate(spectral_cluster(X, kernel), got) == 0

    def test_rejects_non_psd_kernel(self):
        X, _ = blobs(30, 0)
        with pytest.raises(ValueError, match="PSD kernel"):
            nystrom_sc(X, SampleSpec(0.5), KernelSpec.self_tuned())

    def test_blobs(self):
        X, truth = blobs(200, 4, gap=10.0)
        assert misclustering_rate(truth, nystrom_sc(X, SampleSpec(0.1, seed=0), KernelSpec.fixed(1.0))) == 0


class TestBudget:
    def test_fraction_to_count(self):
        assert pair_count(200) == 19900
        assert budget_from_fraction(200, 0.15) == 2985
        assert budget_from_fraction(200, 1.0) == 19900
        with pytest.raises(ValueError):
            budget_from_fraction(200, 0.0)

    def test_full_budget_is_dense_similarity(self):
        X, _ = blobs(40, 0)
        kernel = KernelSpec.fixed(1.0)
        W = budget_matrix(X, pair_count(40), kernel)
        assert isinstance(W, np.ndarray)
        np.testing.assert_array_equal(W, build_similarity(X, kernel))

    def test_structure(self):
        X, _ = blobs(300, 1)
        kernel = KernelSpec.fixed(0.05)  # small sigma: many entries underflow to 0
        n, b = 300, 4000
        Wt = budget_matrix(X, b, kernel, seed=3)
        assert scipy.sparse.issparse(Wt)
        assert Wt.nnz == 2 * b + n
        assert (Wt != Wt.T).nnz == 0
        np.testing.assert_array_equal(Wt.diagonal(), np.full(n, 2 * b / (n * (n - 1))))
        W = build_similarity(X, kernel)
        coo = Wt.tocoo()
        off = coo.row != coo.col
        np.testing.assert_array_equal(coo.data[off], W[coo.row[off], coo.col[off]])

    def test_dense_storage_when_full(self):
        X, _ = blobs(50, 1)
        Wt = budget_matrix(X, 1000, KernelSpec.fixed(1.0), seed=0)
        assert isinstance(Wt, np.ndarray)
        np.testing.assert_array_equal(Wt, Wt.T)
        assert np.count_nonzero(Wt[~np.eye(50, dtype=bool)]) == 2000

    def test_pair_sampling_uniform(self):
        n, b, trials = 5, 3, 4000
        counts = np.zeros((n, n))
        for s in range(trials):
            i, j = sample_pairs(n, b, seed=s)
            counts[i, j] += 1
        upper = counts[np.triu_indices(n, 1)]
        expected = trials * b / pair_count(n)
        assert np.all(np.abs(upper - expected) <= 5 * np.sqrt(expected))

    def test_bad_budget(self):
        with pytest.raises(ValueError):
            sample_pairs(4, 7)

    def test_rings(self):
        data = gen_synthetic(ShapeSpec("concentric-rings", seed=0))
        ref = spectral_cluster(data.values)
        b = budget_from_fraction(data.n, 0.1)
        errors = [misclustering_rate(ref, budget_sc(data.values, b, KernelSpec.fixed(0.8), seed=s)) for s in range(10)]
        # a few boundary points can flip in a single run; never more than 4 of 800
        assert max(errors) <= 0.005


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 80), frac=st.floats(0.001, 1.0), seed=st.integers(0, 2**31 - 1))
def test_sampled_pairs_distinct(n, frac, seed):
    b = budget_from_fraction(n, frac)
    i, j = sample_pairs(n, b, seed)
    assert i.size == b
    assert np.all(i < j) and np.all(j < n) and np.all(i >= 0)
    key = i * n + j
    assert np.unique(key).size == b
    assert np.all(np.diff(key) > 0)


@pytest.mark.parametrize("method", ["fast", "espec", "nystrom", "budget"])
def test_deterministic(method):
    X, _ = blobs(150, 7)
    run = {
        "fast": lambda: fast_sc(X, 30, seed=3),
        "espec": lambda: espec(X, SampleSpec(0.2, seed=3)),
        "nystrom": lambda: nystrom_sc(X, SampleSpec(0.2, seed=3)),
        "budget": lambda: budget_sc(X, budget_from_fraction(150, 0.2), seed=3),
    }[method]
    np.testing.assert_array_equal(run(), run())

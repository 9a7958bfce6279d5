import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from shadownet.core import (RngSeed, bernoulli_mask, derive_seed, gaussian_matrix, make_rng, matvec,
                            matvec_t, relu, relu_prime, subset_mask)

finite = st.floats(-1e6, 1e6, allow_nan=False)
CI_SEEDS = [RngSeed(0), RngSeed(1), RngSeed(42), RngSeed(2024), RngSeed(777), RngSeed(2**64 - 1, 5)]


def naive_matvec(W, v):
    out = np.zeros(W.shape[0])
    for i in range(W.shape[0]):
        for j in range(W.shape[1]):
            out[i] += W[i, j] * v[j]
    return out


class TestRelu:
    def test_examples(self):
        np.testing.assert_array_equal(relu([-1, 2, 0]), [0, 2, 0])
        np.testing.assert_array_equal(relu([0, 0]), [0, 0])
        np.testing.assert_array_equal(relu(2 * np.array([-1.0, 3.0])), [0, 6])

    def test_prime_examples(self):
        np.testing.assert_array_equal(relu_prime([-1, 2, 0]), [0, 1, 0])
        np.testing.assert_array_equal(relu_prime([5]), [1])

    @given(arrays(np.float64, st.integers(1, 30), elements=finite), st.integers(-20, 20))
    def test_homogeneous_for_powers_of_two(self, v, e):
        beta = 2.0 ** e
        np.testing.assert_array_equal(relu(beta * v), beta * relu(v))

    @given(arrays(np.float64, st.integers(1, 30), elements=finite))
    def test_relu_times_prime_is_relu(self, v):
        np.testing.assert_array_equal(relu(v) * relu_prime(v), relu(v))


class TestSeeds:
    def test_rngseed_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            RngSeed(-1)
        with pytest.raises(ValueError):
            RngSeed(2**64)

    def test_derive_deterministic(self):
        s = RngSeed(9, 3)
        assert derive_seed(s, 0) == derive_seed(s, 0)
        a = [derive_seed(s, i) for i in range(5)]
        b = [derive_seed(s, i) for i in reversed(range(5))][::-1]
        assert a == b

    def test_derive_distinct_over_ci_seeds(self):
        seen = {derive_seed(s, i) for s in CI_SEEDS for i in range(2000)}
        assert len(seen) == len(CI_SEEDS) * 2000
        assert not seen & set(CI_SEEDS)

    def test_plain_int_seed_equals_master(self):
        assert derive_seed(5, 1) == derive_seed(RngSeed(5, 0), 1)
        np.testing.assert_array_equal(make_rng(5).random(4), make_rng(RngSeed(5)).random(4))

    def test_stream_changes_draws(self):
        assert make_rng(RngSeed(1, 0)).random() != make_rng(RngSeed(1, 1)).random()


class TestGaussian:
    def test_deterministic(self):
        s = RngSeed(11)
        np.testing.assert_array_equal(gaussian_matrix(7, 5, s), gaussian_matrix(7, 5, s))

    def test_moments(self):
        W = gaussian_matrix(1000, 1000, RngSeed(3))
        assert abs(W.mean()) <= 0.01
        assert abs(W.var() - 1) <= 0.02

    def test_single_entry(self):
        W = gaussian_matrix(1, 1, RngSeed(1))
        assert W.shape == (1, 1) and np.isfinite(W[0, 0])

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            gaussian_matrix(0, 3, RngSeed(1))


class TestMasks:
    def test_bernoulli_extremes(self):
        assert bernoulli_mask(50, 1.0, 1).sum() == 50
        assert bernoulli_mask(50, 0.0, 1).sum() == 0

    def test_bernoulli_popcount_range(self):
        for i in range(20):
            assert 420 <= bernoulli_mask(1000, 0.5, derive_seed(1, i)).sum() <= 580

    def test_bernoulli_rejects_bad_rho(self):
        with pytest.raises(ValueError):
            bernoulli_mask(5, 1.5, 1)

    def test_bernoulli_popcount_chi_square(self):
        n, rho, draws = 20, 0.3, 10_000
        counts = np.array([bernoulli_mask(n, rho, derive_seed(99, i)).sum() for i in range(draws)], dtype=int)
        probs = stats.binom.pmf(np.arange(n + 1), n, rho)
        # pool tails so every expected count is at least 5
        lo, hi = 1, 11
        obs = [np.sum(counts <= lo)] + [np.sum(counts == k) for k in range(lo + 1, hi)] + [np.sum(counts >= hi)]
        exp = [probs[: lo + 1].sum()] + list(probs[lo + 1: hi]) + [probs[hi:].sum()]
        exp = np.array(exp) * draws
        assert exp.min() >= 5
        assert stats.chisquare(obs, exp).pvalue > 1e-3

    def test_subset_cardinality(self):
        assert subset_mask(10, 3, 1).sum() == 3
        assert subset_mask(10, 10, 1).sum() == 10
        assert subset_mask(10, 0, 1).sum() == 0

    def test_subset_too_large(self):
        with pytest.raises(ValueError):
            subset_mask(5, 6, 1)

    def test_subset_is_uniform_marginally(self):
        hits = sum(subset_mask(10, 3, derive_seed(4, i)) for i in range(6000))
        np.testing.assert_allclose(hits / 6000, 0.3, atol=0.03)


class TestMatvec:
    def test_identity_and_zero(self):
        np.testing.assert_array_equal(matvec(np.eye(3), [1, 2, 3]), [1, 2, 3])
        np.testing.assert_array_equal(matvec(np.zeros((2, 3)), [1, 2, 3]), [0, 0])

    def test_gram_column_against_triple_loop(self, rng):
        W = rng.standard_normal((4, 4))
        WtW = np.zeros((4, 4))
        for i in range(4):
            for j in range(4):
                for r in range(4):
                    WtW[i, j] += W[r, i] * W[r, j]
        for i in range(4):
            e = np.eye(4)[i]
            np.testing.assert_allclose(matvec_t(W, matvec(W, e)), WtW[:, i], rtol=0, atol=1e-12)

    @settings(max_examples=50)
    @given(arrays(np.float64, (8, 8), elements=st.floats(-10, 10)), arrays(np.float64, 8, elements=st.floats(-10, 10)))
    def test_against_naive(self, W, v):
        scale = np.abs(W).sum() * np.abs(v).max() + 1e-300
        np.testing.assert_allclose(matvec(W, v), naive_matvec(W, v), rtol=1e-12, atol=1e-12 * scale)
        np.testing.assert_allclose(matvec_t(W, v), naive_matvec(W.T, v), rtol=1e-12, atol=1e-12 * scale)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matvec(np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(ValueError):
            matvec_t(np.zeros((2, 3)), np.zeros(3))

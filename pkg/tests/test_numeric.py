import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from alr_lab.errors import DimensionError, NumericInputError
from alr_lab.numeric import (RngStream, entropy, grad_check, log_softmax, numerical_gradient,
                             relative_error, rng_gaussian, rng_uniform, softmax)


def splitmix64_reference(seed, n):
    """Scalar Python-int SplitMix64, independent of the vectorized path."""
    mask = (1 << 64) - 1
    s, out = seed, []
    for _ in range(n):
        s = (s + 0x9E3779B97F4A7C15) & mask
        z = s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax([0.0, 0.0, 0.0]), [1 / 3] * 3, rtol=0, atol=1e-15)

    def test_large_equal_logits_do_not_overflow(self):
        assert softmax([1000.0, 1000.0]).tolist() == [0.5, 0.5]

    def test_matches_high_precision_oracle(self):
        mpmath.mp.dps = 40
        exps = [mpmath.e ** k for k in (1, 2, 3)]
        oracle = [float(e / sum(exps)) for e in exps]
        p = softmax([1.0, 2.0, 3.0])
        np.testing.assert_allclose(p, oracle, rtol=1e-14)
        np.testing.assert_allclose(p, [0.09003057, 0.24472847, 0.66524096], atol=5e-9)

    def test_empty_raises(self):
        with pytest.raises(DimensionError):
            softmax([])

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite_raises(self, bad):
        with pytest.raises(NumericInputError):
            softmax([0.0, bad])

    @settings(max_examples=200)
    @given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e3, 1e3)),
           st.floats(-1e3, 1e3))
    def test_shift_invariance(self, z, c):
        np.testing.assert_allclose(softmax(z + c), softmax(z), rtol=0, atol=1e-12)

    @settings(max_examples=200)
    @given(st.integers(1, 16), st.integers(-3, 3), st.integers(0, 2**32 - 1))
    def test_sums_to_one_across_magnitudes(self, n, log_scale, seed):
        z = np.random.default_rng(seed).normal(size=n) * 10.0 ** log_scale
        p = softmax(z)
        assert np.all(p > 0) or log_scale == 3
        assert abs(p.sum() - 1.0) <= 1e-12

    def test_log_softmax_consistent(self):
        z = np.array([[0.3, -2.0, 5.0], [1.0, 1.0, 1.0]])
        np.testing.assert_allclose(np.exp(log_softmax(z)), softmax(z), rtol=1e-14)


def test_entropy_of_uniform():
    assert entropy(np.full(9, 1 / 9)) == pytest.approx(math.log(9), abs=1e-14)
    assert entropy([1.0, 0.0]) == 0.0


class TestGradCheck:
    def test_quadratic(self):
        f = lambda x: float(x @ x)
        assert grad_check(f, np.array([3.0]), np.array([6.0]), 1e-5) < 1e-9

    def test_detects_wrong_gradient(self):
        f = lambda x: float(np.sum(np.sin(x)))
        x = np.array([0.1, 0.7])
        assert grad_check(f, x, np.cos(x), 1e-5) < 1e-9
        assert grad_check(f, x, np.cos(x) + 1e-3, 1e-5) > 1e-4

    def test_non_finite_function_raises(self):
        with pytest.raises(NumericInputError), np.errstate(invalid="ignore"):
            numerical_gradient(lambda x: float(np.log(x[0])), np.array([0.0]), 1e-5)

    def test_matrix_shaped_point(self):
        A = np.arange(6.0).reshape(2, 3)
        g = numerical_gradient(lambda X: float(np.sum(X * X)), A, 1e-5)
        np.testing.assert_allclose(g, 2 * A, atol=1e-8)

    def test_relative_error_definition(self):
        assert relative_error([10.0], [10.1]) == pytest.approx(0.1 / 10.1)
        assert relative_error([1e-3], [0.0]) == pytest.approx(1e-3)


class TestRng:
    def test_known_vector_seed_zero(self):
        # Published first output of SplitMix64 seeded with 0.
        assert int(RngStream(0).next_u64(1)[0]) == 0xE220A8397B1DCDAF

    @pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 12345, 2**64 - 1])
    def test_matches_scalar_reference(self, seed):
        r = RngStream(seed)
        got = list(map(int, r.next_u64(3))) + list(map(int, r.next_u64(4)))
        assert got == splitmix64_reference(seed, 7)

    def test_seed_42_first_values(self):
        assert list(map(int, RngStream(42).next_u64(2))) == [13679457532755275413, 2949826092126892291]
        np.testing.assert_array_equal(
            RngStream(42).uniform(3), [0.7415648787718233, 0.1599103928769201, 0.27860113025513866])

    def test_empty_draw(self):
        r = RngStream(42)
        assert rng_uniform(r, 0).size == 0
        assert rng_gaussian(r, 0).size == 0
        assert r.state == 42

    def test_determinism(self):
        np.testing.assert_array_equal(RngStream(42).gaussian(50), RngStream(42).gaussian(50))

    def test_uniform_range(self):
        u = RngStream(7).uniform(10_000)
        assert u.min() >= 0.0 and u.max() < 1.0

    def test_gaussian_is_box_muller_of_uniform_pairs(self):
        u = RngStream(3).uniform(6)
        expected = np.sqrt(-2 * np.log(1 - u[0::2])) * np.cos(2 * np.pi * u[1::2])
        np.testing.assert_allclose(RngStream(3).gaussian(3), expected, rtol=1e-15)

    def test_gaussian_mean(self):
        g = RngStream(2024).gaussian(100_000)
        assert -0.02 < g.mean() < 0.02
        assert abs(g.std() - 1.0) < 0.01

    def test_split_draws_equal_single_draw(self):
        a = RngStream(9)
        first = np.concatenate([a.uniform(3), a.uniform(5)])
        np.testing.assert_array_equal(first, RngStream(9).uniform(8))

    def test_substreams(self):
        root = RngStream(5)
        s0, s1 = root.substream(0), root.substream(1)
        assert s0.seed == splitmix64_reference(5, 1)[0]
        assert s1.seed == splitmix64_reference(5, 2)[1]
        assert root.state == 5

    def test_permutation(self):
        p = RngStream(1).permutation(100)
        assert sorted(p.tolist()) == list(range(100))
        np.testing.assert_array_equal(p, RngStream(1).permutation(100))

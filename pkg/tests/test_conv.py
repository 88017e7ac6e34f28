"""Tests for the convolution/Toeplitz/pooling primitives.

Expected values come from literal index-by-index evaluation of the defining
sums (the oracles below), never from the library routines under test.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edcnn import Filter, PoolParams, conv_classic, conv_padded, max_pool, pmax, relu, toeplitz_matrix


def oracle_conv_padded(w, v):
    """(w * v)_j = sum_{k=1..d'} w_{j-k} v_k for j = 1..d'+S, w zero off {0..S}."""
    S = len(w) - 1
    d = len(v)
    out = np.zeros(d + S)
    for j in range(1, d + S + 1):
        acc = 0.0
        for k in range(1, d + 1):
            if 0 <= j - k <= S:
                acc += w[j - k] * v[k - 1]
        out[j - 1] = acc
    return out


def oracle_conv_classic(w, v):
    """(w x v)_j = sum_{k=j-s..j} w_{j-k} v_{k+s} for j = 1..d'-s."""
    s = len(w) - 1
    d = len(v)
    out = np.zeros(d - s)
    for j in range(1, d - s + 1):
        acc = 0.0
        for k in range(j - s, j + 1):
            if 0 <= j - k <= s and 1 <= k + s <= d:
                acc += w[j - k] * v[k + s - 1]
        out[j - 1] = acc
    return out


def oracle_max_pool(v, u):
    """k-th entry is max over v_{(k-1)u+1} .. v_{ku}."""
    n = len(v) // u
    return np.array([max(v[(k - 1) * u : k * u]) for k in range(1, n + 1)])


class TestConvPadded:
    def test_delta_with_declared_bound_extends_with_zeros(self):
        w = Filter(np.array([1.0, 0.0, 0.0]))  # delta declared with bound 2
        assert np.array_equal(conv_padded(w, [3.0, 5.0]), [3.0, 5.0, 0.0, 0.0])

    def test_matches_literal_sum(self):
        w = Filter(np.array([1.0, 1.0]))
        got = conv_padded(w, [1.0, 2.0, 3.0])
        assert np.array_equal(got, oracle_conv_padded([1.0, 1.0], [1.0, 2.0, 3.0]))
        assert np.array_equal(got, [1.0, 3.0, 5.0, 3.0])

    def test_zero_vector_maps_to_zero(self):
        w = Filter(np.array([0.3, -2.0, 1.0]))
        assert np.array_equal(conv_padded(w, np.zeros(5)), np.zeros(7))

    def test_random_against_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            w = rng.standard_normal(rng.integers(1, 6))
            v = rng.standard_normal(rng.integers(1, 9))
            got = conv_padded(Filter(w), v)
            assert np.allclose(got, oracle_conv_padded(w, v), atol=1e-12)

    def test_empty_vector_rejected(self):
        with pytest.raises(ValueError):
            conv_padded(Filter(np.array([1.0])), [])

    def test_linearity(self):
        rng = np.random.default_rng(1)
        w = Filter(rng.standard_normal(4))
        v1, v2 = rng.standard_normal(6), rng.standard_normal(6)
        lhs = conv_padded(w, 2.5 * v1 - v2)
        rhs = 2.5 * conv_padded(w, v1) - conv_padded(w, v2)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_composition_equals_convolved_filter(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            w1 = rng.standard_normal(rng.integers(1, 5))
            w2 = rng.standard_normal(rng.integers(1, 5))
            v = rng.standard_normal(rng.integers(1, 8))
            two_step = conv_padded(Filter(w2), conv_padded(Filter(w1), v))
            product = Filter(np.convolve(w2, w1))
            assert np.allclose(two_step, conv_padded(product, v), atol=1e-10)


class TestConvClassic:
    def test_delta_against_literal_sum(self):
        # filter of length s=1 means indices {0, 1}; the literal sum decides
        w = np.array([1.0, 0.0])
        v = np.array([4.0, 7.0, 9.0])
        expect = oracle_conv_classic(w, v)
        assert np.array_equal(expect, [7.0, 9.0])
        assert np.array_equal(conv_classic(Filter(w), v), expect)

    def test_two_entry_input_gives_dim_one(self):
        w = np.array([1.0, 0.0])
        v = np.array([11.0, 13.0])
        got = conv_classic(Filter(w), v)
        assert got.shape == (1,)
        assert np.array_equal(got, oracle_conv_classic(w, v))

    def test_zero_vector(self):
        assert np.array_equal(
            conv_classic(Filter(np.array([1.0, 2.0, -1.0])), np.zeros(5)), np.zeros(3)
        )

    def test_random_against_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            s = rng.integers(1, 4)
            d = rng.integers(s + 1, s + 8)
            w = rng.standard_normal(s + 1)
            v = rng.standard_normal(d)
            assert np.allclose(
                conv_classic(Filter(w), v), oracle_conv_classic(w, v), atol=1e-12
            )

    def test_dimension_error(self):
        with pytest.raises(ValueError):
            conv_classic(Filter(np.array([1.0, 1.0, 1.0])), [1.0, 2.0])


class TestToeplitz:
    def test_small_example(self):
        T = toeplitz_matrix(Filter(np.array([1.0, 1.0])), 2)
        assert np.array_equal(T, [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

    def test_entry_formula(self):
        rng = np.random.default_rng(4)
        w = rng.standard_normal(4)
        T = toeplitz_matrix(Filter(w), 5)
        S = 3
        for i in range(T.shape[0]):
            for k in range(T.shape[1]):
                expect = w[i - k] if 0 <= i - k <= S else 0.0
                assert T[i, k] == expect

    def test_matvec_equals_conv_padded(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            w = rng.standard_normal(rng.integers(1, 6))
            v = rng.standard_normal(rng.integers(1, 9))
            T = toeplitz_matrix(Filter(w), len(v))
            assert np.allclose(T @ v, conv_padded(Filter(w), v), atol=1e-12)

    def test_delta_gives_identity_block(self):
        T = toeplitz_matrix(Filter(np.array([1.0, 0.0, 0.0])), 4)
        assert np.array_equal(T[:4], np.eye(4))
        assert not T[4:].any()


class TestRelu:
    def test_basic(self):
        assert np.array_equal(relu([-1.0, 0.0, 2.0]), [0.0, 0.0, 2.0])

    def test_identity_on_nonnegative(self):
        v = np.array([0.0, 1.0, 3.5])
        assert np.array_equal(relu(v), v)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
    def test_idempotent(self, vals):
        v = np.array(vals)
        assert np.array_equal(relu(relu(v)), relu(v))


class TestMaxPool:
    def test_direct_example(self):
        assert np.array_equal(max_pool([1.0, 2.0, 3.0, 4.0], 2), [2.0, 4.0])
        assert np.array_equal(
            max_pool([1.0, 2.0, 3.0, 4.0], 2), oracle_max_pool([1, 2, 3, 4], 2)
        )

    def test_pool_size_one_is_identity(self):
        v = np.array([3.0, -1.0, 2.0])
        assert np.array_equal(max_pool(v, 1), v)

    def test_constant_vector(self):
        assert np.array_equal(max_pool(5.0 * np.ones(7), 3), 5.0 * np.ones(2))

    def test_remainder_discarded(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            u = int(rng.integers(1, 5))
            v = rng.standard_normal(int(rng.integers(u, 4 * u + 2)))
            assert np.array_equal(max_pool(v, u), oracle_max_pool(v, u))

    @given(
        st.lists(st.floats(-100, 100), min_size=2, max_size=12),
        st.integers(1, 4),
        st.floats(0.1, 50),
    )
    @settings(max_examples=60)
    def test_commutes_with_positive_scaling(self, vals, u, c):
        v = np.array(vals)
        if len(v) < u:
            return
        assert np.allclose(max_pool(c * v, u), c * max_pool(v, u), rtol=1e-12)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            max_pool([1.0], 2)


class TestPmax:
    def test_formulas_d2_s2(self):
        p = PoolParams(2, 2)
        assert (p.L1max, p.d1max, p.dmax) == (28, 58, 406)

    def test_formula_invariants_exact(self):
        import math

        for d in range(1, 7):
            for s in range(2, 9):
                p = PoolParams(d, s)
                q = 2 * d + 10
                assert p.L1max == math.ceil(q * d / (s - 1))
                assert p.d1max == d + p.L1max * s
                assert p.dmax == q + math.ceil(q * q / (s - 1)) * s

    def test_untriggered_length_unchanged(self):
        p = PoolParams(2, 2)
        v = np.arange(10, dtype=float)
        assert np.array_equal(pmax(v, 3, p), v)

    def test_first_branch(self):
        p = PoolParams(2, 2)
        v = np.arange(p.d1max, dtype=float)
        got = pmax(v, p.L1max, p)
        assert np.array_equal(got, oracle_max_pool(v, p.d))

    def test_first_branch_needs_small_layer_index(self):
        p = PoolParams(2, 2)
        v = np.arange(p.d1max, dtype=float)
        assert np.array_equal(pmax(v, p.L1max + 1, p), v)

    def test_second_branch(self):
        p = PoolParams(2, 2)
        v = np.arange(p.dmax, dtype=float)
        got = pmax(v, 100, p)
        assert np.array_equal(got, oracle_max_pool(v, 2 * p.d + 10))


class TestFilter:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Filter(np.array([1.0, np.nan]))

    def test_effective_support(self):
        assert Filter(np.array([0.0, 1.0, 0.0])).effective_support() == 1
        assert Filter(np.array([0.0])).effective_support() == -1

    def test_immutable(self):
        f = Filter(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            f.coeffs[0] = 5.0

    def test_delta_shift(self):
        f = Filter.delta(bound=3, at=2)
        assert np.array_equal(f.coeffs, [0.0, 0.0, 1.0, 0.0])

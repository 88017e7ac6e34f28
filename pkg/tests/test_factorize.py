"""Tests for root-based filter factorization."""

import numpy as np
import pytest

from edcnn import (
    Filter,
    NumericalError,
    factorize_filter,
    pad_with_deltas,
    reconstruct,
)


def relative_error(rec, u):
    n = max(len(rec.coeffs), len(u.coeffs))
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(rec.coeffs)] = rec.coeffs
    b[: len(u.coeffs)] = u.coeffs
    return np.abs(a - b).max() / np.abs(b).max()


class TestReconstruct:
    def test_single_factor(self):
        f = Filter(np.array([1.0, -2.0, 3.0]))
        assert reconstruct([f]) == f

    def test_pair(self):
        got = reconstruct([Filter(np.array([1.0, 1.0])), Filter(np.array([1.0, 1.0]))])
        assert np.array_equal(got.coeffs, [1.0, 2.0, 1.0])

    def test_delta_is_identity(self):
        f = Filter(np.array([2.0, 0.5, -1.0]))
        got = reconstruct([f, Filter.delta()])
        assert np.array_equal(got.coeffs, f.coeffs)

    def test_declared_bounds_add(self):
        f = Filter(np.array([1.0, 0.0]))  # bound 1, trailing declared zero
        assert reconstruct([f, f]).support_bound == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            reconstruct([])


class TestFactorize:
    def test_short_filter_returned_as_is(self):
        u = Filter(np.array([1.0, 2.0, 1.0]))
        res = factorize_filter(u, 2)
        assert res.depth_used == 1
        assert relative_error(reconstruct(res.factors), u) <= 1e-9

    def test_known_product(self):
        # (1,1) * (1,-1) * (1,2) = (1, 2, -1, -2)
        u = Filter(np.array([1.0, 2.0, -1.0, -2.0]))
        res = factorize_filter(u, 2)
        assert res.depth_used == 2
        assert all(f.support_bound <= 2 for f in res.factors)
        assert relative_error(reconstruct(res.factors), u) <= 1e-9

    @pytest.mark.parametrize("s", [2, 3, 5])
    def test_random_filters(self, s):
        rng = np.random.default_rng(100 + s)
        for _ in range(25):
            S = int(rng.integers(10, 61))
            u = Filter(rng.uniform(-1.0, 1.0, S + 1))
            res = factorize_filter(u, s)
            assert res.depth_used < S / (s - 1) + 1
            assert all(f.support_bound <= s for f in res.factors)
            assert relative_error(reconstruct(res.factors), u) <= 1e-6

    def test_depth_bound_s3_S60(self):
        rng = np.random.default_rng(7)
        u = Filter(rng.uniform(-1.0, 1.0, 61))
        res = factorize_filter(u, 3)
        assert res.depth_used <= 30

    def test_scale_equivariance(self):
        rng = np.random.default_rng(8)
        base = rng.uniform(-1.0, 1.0, 13)
        for c in (3.0, -0.25):
            res = factorize_filter(Filter(c * base), 2)
            rec = reconstruct(res.factors)
            assert relative_error(rec, Filter(c * base)) <= 1e-8

    def test_leading_zeros_handled_exactly(self):
        rng = np.random.default_rng(9)
        tail = rng.uniform(-1.0, 1.0, 9)
        u = Filter(np.concatenate([np.zeros(3), tail]))
        res = factorize_filter(u, 2)
        rec = reconstruct(res.factors)
        assert relative_error(rec, u) <= 1e-8
        # the z^3 part is exact: leading coefficients are exactly zero
        assert np.array_equal(rec.coeffs[:3], np.zeros(3))

    def test_monomial(self):
        u = Filter(np.array([0.0, 0.0, 0.0, 0.0, 2.5]))
        res = factorize_filter(u, 2)
        rec = reconstruct(res.factors)
        assert relative_error(rec, u) == 0.0

    def test_zero_filter_rejected(self):
        with pytest.raises(ValueError):
            factorize_filter(Filter(np.zeros(5)), 2)

    def test_ill_conditioned_fails_loudly(self):
        # A leading coefficient at the round-off floor sends one root to ~1e16;
        # re-expanding the factors cannot reproduce the input, and the
        # reconstruction check must reject rather than return degraded factors.
        rng = np.random.default_rng(0)
        u = np.concatenate([rng.uniform(-1.0, 1.0, 60), [1e-16]])
        with pytest.raises(NumericalError):
            factorize_filter(Filter(u), 2)


class TestPadWithDeltas:
    def test_identity_when_target_equals_depth(self):
        res = factorize_filter(Filter(np.array([1.0, 2.0, -1.0, -2.0])), 2)
        assert pad_with_deltas(res, res.depth_used) is res

    def test_appends_deltas(self):
        u = Filter(np.array([1.0, 2.0, -1.0, -2.0]))
        res = factorize_filter(u, 2)
        padded = pad_with_deltas(res, res.depth_used + 2)
        assert padded.depth_used == res.depth_used + 2
        for f in padded.factors[res.depth_used :]:
            assert np.array_equal(f.coeffs, [1.0])
        assert relative_error(reconstruct(padded.factors), u) <= 1e-9

    def test_target_below_depth_rejected(self):
        res = factorize_filter(Filter(np.array([1.0, 2.0, -1.0, -2.0])), 2)
        with pytest.raises(ValueError):
            pad_with_deltas(res, 1)

    def test_compiled_depth_formula(self):
        # depth target for a d'=2, dt=14 block at s=2
        d_prime, d_tilde, s = 2, 14, 2
        L = -((-d_prime * d_tilde) // (s - 1))
        assert L == 28

"""Core 1-D convolution, Toeplitz, pooling and activation primitives.

All operations work on plain 1-D float64 numpy arrays and are pure functions;
filters are immutable value objects. Index conventions follow the expansive
(zero-padded) convolution: a filter supported on {0,...,S} maps a length-d'
vector to a length-(d'+S) vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


def _as_vector(v, name: str = "v") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Filter:
    """Finitely supported real coefficient sequence on {0,...,S}.

    ``coeffs[j]`` is the coefficient at index j; the declared support bound is
    ``len(coeffs) - 1``. Zeros are stored explicitly: a delta filter declared
    with bound 2 has coeffs (1, 0, 0) and produces outputs two entries longer
    than a delta with bound 0.
    """

    coeffs: np.ndarray = field()

    def __post_init__(self):
        arr = _as_vector(self.coeffs, "coeffs")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def support_bound(self) -> int:
        return len(self.coeffs) - 1

    def effective_support(self) -> int:
        """Largest index with a nonzero coefficient (-1 for the zero filter)."""
        nz = np.nonzero(self.coeffs)[0]
        return int(nz[-1]) if len(nz) else -1

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def fits_length(self, s: int) -> bool:
        """True if this is a "length-s filter", i.e. declared bound <= s."""
        return self.support_bound <= s

    def with_bound(self, S: int) -> "Filter":
        """Re-declare the support bound, padding with explicit zeros."""
        if S < self.support_bound:
            raise ValueError(f"cannot shrink bound {self.support_bound} to {S}")
        return Filter(np.concatenate([self.coeffs, np.zeros(S - self.support_bound)]))

    @staticmethod
    def delta(bound: int = 0, at: int = 0) -> "Filter":
        """Delta sequence (convolution identity), optionally shifted to index ``at``."""
        if bound < at:
            raise ValueError("shift exceeds declared bound")
        c = np.zeros(bound + 1)
        c[at] = 1.0
        return Filter(c)

    def __eq__(self, other):
        return isinstance(other, Filter) and np.array_equal(self.coeffs, other.coeffs)


@dataclass(frozen=True)
class PoolParams:
    """Dimension bookkeeping for the width-triggered max-pooling scheme.

    For input dimension d and filter length parameter s >= 2:

        L1max = ceil((2d+10)*d / (s-1))
        d1max = d + L1max*s
        dmax  = 2d+10 + ceil((2d+10)^2 / (s-1)) * s

    All arithmetic is exact integer arithmetic.
    """

    d: int
    s: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.s < 2:
            raise ValueError("s must be >= 2")

    @property
    def L1max(self) -> int:
        q = 2 * self.d + 10
        return -((-q * self.d) // (self.s - 1))

    @property
    def d1max(self) -> int:
        return self.d + self.L1max * self.s

    @property
    def dmax(self) -> int:
        q = 2 * self.d + 10
        return q + (-((-q * q) // (self.s - 1))) * self.s


def conv_padded(w: Filter, v) -> np.ndarray:
    """Zero-padded convolution: output_j = sum_k w_{j-k} v_k, j = 1..d'+S.

    The output length is d' + S where S is the filter's declared support
    bound, so trailing declared zeros extend the output with zeros.
    """
    v = _as_vector(v)
    return np.convolve(w.coeffs, v)


def conv_classic(w: Filter, v) -> np.ndarray:
    """Classical (valid) convolution, contracting d' to d'-s.

    With s the declared bound, output_j = sum_{k=j-s..j} w_{j-k} v_{k+s} for
    j = 1..d'-s. Note the input indexing offset v_{k+s}: output_j involves
    v_j..v_{j+s}, i.e. this is a full-overlap sliding window.
    """
    v = _as_vector(v)
    s = w.support_bound
    if len(v) <= s:
        raise ValueError(f"need dim(v) > s, got {len(v)} <= {s}")
    return np.convolve(w.coeffs, v, mode="valid")


def toeplitz_matrix(w: Filter, d_prime: int) -> np.ndarray:
    """The (d'+S) x d' Toeplitz matrix with entries T[i,k] = w_{i-k}.

    Matrix-vector product with T equals ``conv_padded(w, .)``.
    """
    if d_prime < 1:
        raise ValueError("d_prime must be >= 1")
    S = w.support_bound
    col = np.zeros(d_prime + S)
    col[: S + 1] = w.coeffs
    row = np.zeros(d_prime)
    row[0] = w.coeffs[0]
    return scipy.linalg.toeplitz(col, row)


def relu(v) -> np.ndarray:
    """Componentwise max(t, 0)."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def max_pool(v, u: int) -> np.ndarray:
    """Blockwise maximum with block size u; output dim floor(d'/u).

    Trailing entries beyond u*floor(d'/u) are discarded.
    """
    v = _as_vector(v)
    if u < 1:
        raise ValueError("pooling size must be >= 1")
    if len(v) < u:
        raise ValueError(f"dim(v)={len(v)} smaller than pooling size {u}")
    n = len(v) // u
    return v[: n * u].reshape(n, u).max(axis=1)


def pmax(v, layer_index: int, p: PoolParams) -> np.ndarray:
    """Length- and layer-triggered pooling rule.

    Pools with size d when dim(v) equals d1max and the layer index is at most
    L1max; pools with size 2d+10 when dim(v) equals dmax; otherwise returns v
    unchanged. The layer index is explicit because length alone cannot
    disambiguate the first branch.
    """
    v = _as_vector(v)
    if len(v) == p.d1max and layer_index <= p.L1max:
        return max_pool(v, p.d)
    if len(v) == p.dmax:
        return max_pool(v, 2 * p.d + 10)
    return v

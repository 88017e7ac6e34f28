"""Factor a finitely supported filter into a product of short filters.

A filter supported on {0,...,S} factors into fewer than S/(s-1) + 1 filters
supported on {0,...,s}, obtained by grouping the roots of its symbol
polynomial p(z) = sum_k u_k z^k into real factors of degree at most s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conv import Filter

# Relative max-norm reconstruction error above which factorization fails loudly.
RECONSTRUCTION_TOL = 1e-6

# Imaginary residue allowed when collapsing conjugate pairs to real coefficients.
IMAG_TOL = 1e-10


class NumericalError(RuntimeError):
    """Root finding or reconstruction failed beyond the acceptance threshold."""


@dataclass(frozen=True)
class FactorizationResult:
    """Ordered short factors whose convolution product reproduces the input."""

    factors: tuple
    depth_used: int
    reconstruction_error: float
    s: int
    input_support: int

    def __post_init__(self):
        if self.depth_used != len(self.factors):
            raise ValueError("depth_used must equal the number of factors")
        # Factor-count bound from the factorization lemma.
        if not self.depth_used < self.input_support / (self.s - 1) + 1:
            raise ValueError(
                f"factor count {self.depth_used} violates bound "
                f"< {self.input_support / (self.s - 1) + 1}"
            )


def reconstruct(factors) -> Filter:
    """Full convolution product of a nonempty factor list.

    Support bound of the result is the sum of the declared factor bounds.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("factor list must be nonempty")
    out = np.array([1.0])
    for f in factors:
        out = np.convolve(out, f.coeffs)
    return Filter(out)


def _sorted_root_pieces(roots):
    """Group roots into real linear/quadratic coefficient arrays (ascending).

    Roots are visited sorted by magnitude then angle; conjugate pairs are
    merged into quadratics so every piece has real coefficients.
    """
    order = sorted(
        range(len(roots)), key=lambda i: (abs(roots[i]), np.angle(roots[i]))
    )
    used = np.zeros(len(roots), dtype=bool)
    pieces = []
    for i in order:
        if used[i]:
            continue
        r = roots[i]
        used[i] = True
        if abs(r.imag) <= 1e-8 * max(1.0, abs(r)):
            pieces.append(np.array([-r.real, 1.0]))
            continue
        # nearest unused root to the conjugate
        cand = np.flatnonzero(~used)
        if len(cand) == 0:
            raise NumericalError(f"unpaired complex root {r!r}")
        j = cand[np.argmin(np.abs(roots[cand] - np.conj(r)))]
        used[j] = True
        rj = roots[j]
        a = -(r + rj)
        b = r * rj
        resid = max(abs(a.imag), abs(b.imag))
        if resid > IMAG_TOL * max(1.0, abs(a.real), abs(b.real)):
            raise NumericalError(
                f"conjugate grouping left imaginary residue {resid:.3e}"
            )
        pieces.append(np.array([b.real, a.real, 1.0]))
    return pieces


def _pack_pieces(pieces, s: int):
    """Greedily pack linear/quadratic pieces into factors of degree <= s."""
    factors = []
    cur = np.array([1.0])
    for p in pieces:
        if (len(cur) - 1) + (len(p) - 1) <= s:
            cur = np.convolve(cur, p)
        else:
            factors.append(cur)
            cur = p
    factors.append(cur)
    return factors


def factorize_filter(u: Filter, s: int) -> FactorizationResult:
    """Factor ``u`` into filters supported on {0,...,s} via polynomial roots.

    Raises ValueError for the zero filter and NumericalError when the
    re-convolved product misses ``u`` by more than RECONSTRUCTION_TOL in
    relative max-norm.
    """
    if s < 2:
        raise ValueError("s must be >= 2")
    if u.is_zero():
        raise ValueError("cannot factorize the zero filter")

    coeffs = u.coeffs
    nz = np.nonzero(coeffs)[0]
    shift = int(nz[0])          # exact leading zeros: shift roots at z = 0
    deg_hi = int(nz[-1])        # degree after trimming trailing zeros
    core = coeffs[shift : deg_hi + 1]
    S_eff = deg_hi  # effective support bound of u

    if S_eff <= s:
        factors = (Filter(coeffs[: deg_hi + 1].copy()),)
    else:
        scale = core[-1]
        if len(core) == 1:
            root_pieces = []
        else:
            roots = np.roots(core[::-1] / scale)
            if not np.all(np.isfinite(roots)):
                raise NumericalError("root finding returned non-finite roots")
            root_pieces = _sorted_root_pieces(roots)
        # exact z^shift handled as degree-1 monomial pieces, packed like roots
        zero_pieces = [np.array([0.0, 1.0])] * shift
        pieces = _pack_pieces(zero_pieces + root_pieces, s)
        pieces[0] = pieces[0] * scale
        factors = tuple(Filter(p) for p in pieces)

    rec = reconstruct(factors)
    err = _relative_error(rec, u)
    if err > RECONSTRUCTION_TOL:
        raise NumericalError(
            f"reconstruction error {err:.3e} exceeds {RECONSTRUCTION_TOL:.1e} "
            f"(S={S_eff}, s={s}, {len(factors)} factors)"
        )
    return FactorizationResult(
        factors=factors,
        depth_used=len(factors),
        reconstruction_error=err,
        s=s,
        input_support=max(S_eff, 1),
    )


def _relative_error(rec: Filter, u: Filter) -> float:
    n = max(len(rec.coeffs), len(u.coeffs))
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(rec.coeffs)] = rec.coeffs
    b[: len(u.coeffs)] = u.coeffs
    return float(np.abs(a - b).max() / np.abs(b).max())


def pad_with_deltas(result: FactorizationResult, L_target: int) -> FactorizationResult:
    """Append delta factors until exactly ``L_target`` factors; product unchanged."""
    if L_target < result.depth_used:
        raise ValueError(
            f"L_target={L_target} below factor count {result.depth_used}"
        )
    if L_target == result.depth_used:
        return result
    factors = result.factors + tuple(
        Filter.delta() for _ in range(L_target - result.depth_used)
    )
    return FactorizationResult(
        factors=factors,
        depth_used=L_target,
        reconstruction_error=result.reconstruction_error,
        s=result.s,
        input_support=max(result.input_support, (L_target - 1) * (result.s - 1) + 1),
    )

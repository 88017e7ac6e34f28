"""Built-in smooth regression targets with documented smoothness certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SmoothTarget:
    """A target function on the unit cube with a smoothness certificate.

    ``f`` maps an (n, d) array of inputs to an (n,) array of values. The
    certificate (r, c0) and the sup-norm bound M document class membership;
    the derivation note records how the constants were obtained.
    """

    name: str
    f: object
    r: float
    c0: float
    M: float
    note: str

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.f(np.asarray(X, dtype=float)), dtype=float)


def _abs_shift(X):
    return np.abs(X[:, 0] - 0.5)


def _sine_product(X):
    return np.prod(np.sin(np.pi * X), axis=1)


def _ramp_pow(X):
    return np.maximum(X[:, 0] - 0.5, 0.0) ** 1.5


def builtin_targets(d: int):
    """The standard target zoo for rate experiments in dimension d."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return [
        SmoothTarget(
            name="abs",
            f=_abs_shift,
            r=1.0,
            c0=1.0,
            M=0.5,
            note="|f(x)-f(x')| = ||x_1-1/2|-|x'_1-1/2|| <= |x_1-x'_1| <= ||x-x'||_2, "
            "so the Lipschitz constant is 1; sup|f| = 1/2 at the cube corners.",
        ),
        SmoothTarget(
            name="sineprod",
            f=_sine_product,
            r=2.0,
            c0=np.pi**2 * np.sqrt(d),
            M=1.0,
            note="analytic; |d2f/dx_j dx_k| <= pi^2, so each first partial is "
            "Lipschitz with constant pi^2 sqrt(d); checked by grid maximization.",
        ),
        SmoothTarget(
            name="ramp32",
            f=_ramp_pow,
            r=1.5,
            c0=1.5,
            M=0.5**1.5,
            note="f' = (3/2) sqrt(max(x_1-1/2, 0)) and |sqrt(a)-sqrt(b)| <= "
            "sqrt(|a-b|), so f' is 1/2-Hoelder with constant 3/2.",
        ),
    ]


def target_by_name(name: str, d: int) -> SmoothTarget:
    for t in builtin_targets(d):
        if t.name == name:
            return t
    raise ValueError(f"unknown target {name!r}")

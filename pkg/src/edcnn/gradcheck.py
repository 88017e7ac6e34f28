"""Finite-difference verification of the reverse-mode gradients.

Central differences are noisy near ReLU and pooling kinks, so datasets whose
samples land within a small margin of a kink are resampled rather than
compared.
"""

from __future__ import annotations

import numpy as np

from .conv import Filter
from .nets import ConvLayer, PooledEDCNN, pool_schedule
from .train import Dataset, empirical_risk, grad_empirical_risk

KINK_MARGIN = 1e-6


def random_network(rng, d: int, s: int, L: int, with_pool: bool = True) -> PooledEDCNN:
    pools = list(pool_schedule(d, s, L))
    if with_pool and L >= 2 and rng.random() < 0.5:
        # exercise argmax routing: insert one explicit pooling step
        ell = int(rng.integers(1, L))
        width = d
        for i in range(ell + 1):
            width += s
            if i < ell:
                width //= pools[i]
        u = int(rng.integers(2, min(4, width) + 1))
        pools[ell] = u
    layers = []
    width = d
    for ell in range(L):
        width += s
        w = rng.uniform(-1.0, 1.0, s + 1) / np.sqrt(s + 1)
        b = rng.uniform(-0.5, 0.5, width)
        layers.append(ConvLayer(Filter(w), b))
        width //= pools[ell]
    a = rng.uniform(-1.0, 1.0, width) / np.sqrt(width)
    return PooledEDCNN(s=s, d=d, layers=tuple(layers), pool_sizes=tuple(pools),
                       output_weights=a)


def kink_adjacent(net: PooledEDCNN, X: np.ndarray, margin: float = KINK_MARGIN) -> bool:
    """True if any sample sits within ``margin`` of a ReLU zero or pooling tie."""
    V = np.asarray(X, dtype=float)
    s = net.s
    for layer, u in zip(net.layers, net.pool_sizes):
        n, D = V.shape
        Z = np.zeros((n, D + s))
        for i in range(s + 1):
            Z[:, i : i + D] += layer.filter.coeffs[i] * V
        Z += layer.bias
        if np.any(np.abs(Z) < margin):
            return True
        V = np.maximum(Z, 0.0)
        if u > 1:
            k = V.shape[1] // u
            blocks = np.sort(V[:, : k * u].reshape(n, k, u), axis=2)
            if np.any(blocks[:, :, -1] - blocks[:, :, -2] < margin):
                return True
            V = blocks[:, :, -1]
    return False


def _flatten(net: PooledEDCNN):
    parts = []
    for layer in net.layers:
        parts.append(layer.filter.coeffs)
        parts.append(layer.bias)
    parts.append(net.output_weights)
    return np.concatenate(parts)


def _rebuild(net: PooledEDCNN, theta: np.ndarray) -> PooledEDCNN:
    layers = []
    pos = 0
    for layer in net.layers:
        nw = len(layer.filter.coeffs)
        nb = len(layer.bias)
        layers.append(
            ConvLayer(Filter(theta[pos : pos + nw]), theta[pos + nw : pos + nw + nb])
        )
        pos += nw + nb
    a = theta[pos:]
    return PooledEDCNN(s=net.s, d=net.d, layers=tuple(layers),
                       pool_sizes=net.pool_sizes, output_weights=a)


def fd_gradient(net: PooledEDCNN, data: Dataset, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of the empirical risk in every coordinate."""
    theta = _flatten(net)
    out = np.empty_like(theta)
    for i in range(len(theta)):
        tp = theta.copy()
        tp[i] += step
        rp = empirical_risk(_rebuild(net, tp), data)
        tm = theta.copy()
        tm[i] -= step
        rm = empirical_risk(_rebuild(net, tm), data)
        out[i] = (rp - rm) / (2.0 * step)
    return out


def analytic_gradient(net: PooledEDCNN, data: Dataset) -> np.ndarray:
    gfs, gbs, ga = grad_empirical_risk(net, data)
    parts = []
    for gw, gb in zip(gfs, gbs):
        parts.append(gw)
        parts.append(gb)
    parts.append(ga)
    return np.concatenate(parts)


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-5) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())


def run_gradcheck(count: int = 50, max_depth: int = 6, max_m: int = 32,
                  seed: int = 0, rel_tol: float = 1e-4, step: float = 1e-6) -> dict:
    """Compare reverse-mode and finite-difference gradients on random cases."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    resampled = 0
    while checked < count:
        d = int(rng.integers(1, 4))
        s = int(rng.integers(2, 4))
        L = int(rng.integers(1, max_depth + 1))
        m = int(rng.integers(4, max_m + 1))
        net = random_network(rng, d, s, L)
        X = rng.uniform(0.0, 1.0, (m, d))
        y = rng.uniform(-0.8, 0.8, m)
        if kink_adjacent(net, X):
            resampled += 1
            continue
        data = Dataset(inputs=X, targets=y, M=1.0)
        err = max_relative_error(analytic_gradient(net, data),
                                 fd_gradient(net, data, step))
        worst = max(worst, err)
        checked += 1
    return {
        "checked": checked,
        "resampled": resampled,
        "worst_rel_error": worst,
        "rel_tol": rel_tol,
        "passed": bool(worst <= rel_tol),
    }

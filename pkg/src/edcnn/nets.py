"""Network models: pooled expansive conv nets, classic conv nets, dense ReLU nets.

Networks are immutable after construction; evaluation is pure, so a single
network value can be shared freely across threads.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .conv import Filter, PoolParams, _as_vector, conv_padded, max_pool, relu


@dataclass(frozen=True)
class ConvLayer:
    """One expansive layer: filter of declared bound s plus a full bias vector."""

    filter: Filter
    bias: np.ndarray = field()

    def __post_init__(self):
        b = _as_vector(self.bias, "bias").copy()
        b.setflags(write=False)
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True)
class PooledEDCNN:
    """Expansive conv net with per-layer max-pooling sizes (1 = no pooling).

    Layer widths chain as d_l = (previous post-pool width) + s before pooling;
    every filter is declared with bound exactly s so the chain is uniform.
    """

    s: int
    d: int
    layers: tuple
    pool_sizes: tuple
    output_weights: np.ndarray = field()

    def __post_init__(self):
        if self.s < 1 or self.d < 1:
            raise ValueError("s and d must be positive")
        layers = tuple(self.layers)
        pools = tuple(int(u) for u in self.pool_sizes)
        if len(layers) != len(pools):
            raise ValueError("need one pooling size per layer")
        width = self.d
        for i, (layer, u) in enumerate(zip(layers, pools)):
            if layer.filter.support_bound != self.s:
                raise ValueError(
                    f"layer {i}: filter bound {layer.filter.support_bound} != s={self.s}"
                )
            width += self.s
            if len(layer.bias) != width:
                raise ValueError(
                    f"layer {i}: bias dim {len(layer.bias)} != width {width}"
                )
            if u < 1 or width < u:
                raise ValueError(f"layer {i}: bad pooling size {u} for width {width}")
            width //= u
        a = _as_vector(self.output_weights, "output_weights").copy()
        if len(a) != width:
            raise ValueError(f"output weights dim {len(a)} != final width {width}")
        a.setflags(write=False)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "pool_sizes", pools)
        object.__setattr__(self, "output_weights", a)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def widths(self):
        """Pre-pool width of every layer, plus the final post-pool width."""
        w = self.d
        pre = []
        for u in self.pool_sizes:
            w += self.s
            pre.append(w)
            w //= u
        return pre, w

    def pmax_consistent(self) -> bool:
        """Stored pooling sizes match the length-triggered rule wherever it fires."""
        p = PoolParams(self.d, self.s)
        w = self.d
        for i, u in enumerate(self.pool_sizes):
            w += self.s
            if w == p.d1max and (i + 1) <= p.L1max:
                if u != p.d:
                    return False
            elif w == p.dmax:
                if u != 2 * self.d + 10:
                    return False
            w //= u
        return True


def pool_schedule(d: int, s: int, L: int):
    """Per-layer pooling sizes for the canonical depth-L family.

    Pools with size d after the first L1max layers, then with size 2d+10 at
    the end of every subsequent block of ceil((2d+10)^2/(s-1)) layers. This
    keeps widths bounded for any depth, and coincides with the
    length-triggered rule at the canonical first-phase width.
    """
    p = PoolParams(d, s)
    q = 2 * d + 10
    L_block = -((-q * q) // (s - 1))
    pools = [1] * L
    if L >= p.L1max:
        pools[p.L1max - 1] = d
        ell = p.L1max + L_block
        while ell <= L:
            pools[ell - 1] = q
            ell += L_block
    return tuple(pools)


@dataclass(frozen=True)
class DFCN:
    """Dense fully-connected ReLU network: x -> a . sigma(W_K(...sigma(W_1 x + t_1)...) + t_K)."""

    affine_layers: tuple
    output_weights: np.ndarray = field()

    def __post_init__(self):
        layers = []
        width = None
        for i, (W, theta) in enumerate(self.affine_layers):
            W = np.asarray(W, dtype=float)
            theta = _as_vector(theta, f"theta[{i}]").copy()
            if W.ndim != 2:
                raise ValueError(f"layer {i}: weight must be a matrix")
            if not np.all(np.isfinite(W)):
                raise ValueError(f"layer {i}: non-finite weights")
            if W.shape[0] != len(theta):
                raise ValueError(f"layer {i}: bias dim {len(theta)} != rows {W.shape[0]}")
            if width is not None and W.shape[1] != width:
                raise ValueError(f"layer {i}: input dim {W.shape[1]} != {width}")
            width = W.shape[0]
            W = W.copy()
            W.setflags(write=False)
            theta.setflags(write=False)
            layers.append((W, theta))
        if not layers:
            raise ValueError("need at least one affine layer")
        a = _as_vector(self.output_weights, "output_weights").copy()
        if len(a) != width:
            raise ValueError(f"output weights dim {len(a)} != final width {width}")
        a.setflags(write=False)
        object.__setattr__(self, "affine_layers", tuple(layers))
        object.__setattr__(self, "output_weights", a)

    @property
    def input_dim(self) -> int:
        return self.affine_layers[0][0].shape[1]


@dataclass(frozen=True)
class SmoothnessSpec:
    """Smoothness class parameters: order r = k + mu with 0 < mu <= 1, constant c0, sup bound M."""

    r: float
    c0: float
    M: float

    def __post_init__(self):
        if self.r <= 0 or self.c0 <= 0 or self.M <= 0:
            raise ValueError("r, c0, M must be positive")

    @property
    def integer_part(self) -> int:
        import math

        return math.ceil(self.r) - 1

    @property
    def holder_exponent(self) -> float:
        return self.r - self.integer_part


def eval_edcnn(net: PooledEDCNN, x) -> float:
    """Forward pass: a . (pool o relu o conv)^L (x)."""
    x = _as_vector(x, "x")
    if len(x) != net.d:
        raise ValueError(f"input dim {len(x)} != d={net.d}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        warnings.warn("input outside [0,1]^d", RuntimeWarning, stacklevel=2)
    v = x
    for layer, u in zip(net.layers, net.pool_sizes):
        v = relu(conv_padded(layer.filter, v) + layer.bias)
        if u > 1:
            v = max_pool(v, u)
    return float(net.output_weights @ v)


def eval_edcnn_batch(net: PooledEDCNN, X: np.ndarray) -> np.ndarray:
    """Forward pass on n inputs stacked as rows of X (n x d)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.d:
        raise ValueError(f"X must be (n, {net.d})")
    V = X
    s = net.s
    for layer, u in zip(net.layers, net.pool_sizes):
        n, D = V.shape
        Z = np.zeros((n, D + s))
        w = layer.filter.coeffs
        for i in range(s + 1):
            Z[:, i : i + D] += w[i] * V
        Z += layer.bias
        V = np.maximum(Z, 0.0)
        if u > 1:
            k = V.shape[1] // u
            V = V[:, : k * u].reshape(n, k, u).max(axis=2)
    return V @ net.output_weights


def eval_classic_dcnn(layers, a, x) -> float:
    """Contracting conv net: widths shrink by the filter bound each layer.

    Rejects chains whose width would hit zero or below.
    """
    x = _as_vector(x, "x")
    a = _as_vector(a, "a")
    width = len(x)
    for i, layer in enumerate(layers):
        s = layer.filter.support_bound
        if width - s <= 0:
            raise ValueError(
                f"layer {i}: contracting width exhausted ({width} - {s} <= 0)"
            )
        width -= s
        if len(layer.bias) != width:
            raise ValueError(f"layer {i}: bias dim {len(layer.bias)} != {width}")
    if len(a) != width:
        raise ValueError(f"output weights dim {len(a)} != final width {width}")
    v = x
    for layer in layers:
        v = relu(np.convolve(layer.filter.coeffs, v, mode="valid") + layer.bias)
    return float(a @ v)


def eval_dfcn(net: DFCN, x) -> float:
    x = _as_vector(x, "x")
    v = x
    for W, theta in net.affine_layers:
        v = relu(W @ v + theta)
    return float(net.output_weights @ v)


def eval_dfcn_batch(net: DFCN, X: np.ndarray) -> np.ndarray:
    V = np.asarray(X, dtype=float).T
    for W, theta in net.affine_layers:
        V = np.maximum(W @ V + theta[:, None], 0.0)
    return net.output_weights @ V


def truncate(y, M: float):
    """Clamp to [-M, M]: sign(y) * min(|y|, M)."""
    if M <= 0:
        raise ValueError("M must be positive")
    return np.clip(y, -M, M) if isinstance(y, np.ndarray) else float(np.clip(y, -M, M))


def param_count(net: PooledEDCNN) -> int:
    """Stored-real count: per layer s+1 filter coefficients plus the bias width,
    plus the output weights."""
    total = len(net.output_weights)
    for layer in net.layers:
        total += (net.s + 1) + len(layer.bias)
    return total


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize(net: PooledEDCNN) -> bytes:
    """JSON payload with reals as decimal strings for bit-exact round-trips."""
    doc = {
        "s": net.s,
        "d": net.d,
        "layers": [
            {
                "filter": [_fmt(c) for c in layer.filter.coeffs],
                "bias": [_fmt(b) for b in layer.bias],
                "pool": u,
            }
            for layer, u in zip(net.layers, net.pool_sizes)
        ],
        "output": [_fmt(c) for c in net.output_weights],
    }
    return json.dumps(doc).encode()


def deserialize(payload: bytes) -> PooledEDCNN:
    """Inverse of :func:`serialize`; raises ValueError on malformed payloads."""
    try:
        doc = json.loads(payload.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"malformed payload: {e}") from None
    try:
        layers = []
        pools = []
        for entry in doc["layers"]:
            layers.append(
                ConvLayer(
                    Filter(np.array([float(c) for c in entry["filter"]])),
                    np.array([float(b) for b in entry["bias"]]),
                )
            )
            pools.append(int(entry["pool"]))
        return PooledEDCNN(
            s=int(doc["s"]),
            d=int(doc["d"]),
            layers=tuple(layers),
            pool_sizes=tuple(pools),
            output_weights=np.array([float(c) for c in doc["output"]]),
        )
    except (KeyError, TypeError, IndexError) as e:
        raise ValueError(f"malformed payload: {e!r}") from None

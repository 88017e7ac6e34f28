"""Least-squares training of pooled conv nets by multi-restart gradient descent.

The trainer approximates the empirical risk minimizer over the depth-L family
with full-batch gradient descent and a step-halving line search. Gradients are
exact reverse-mode: max-pooling routes to the argmax entry (lowest index on
ties) and the ReLU subgradient at zero is taken as zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .conv import Filter
from .factorize import NumericalError
from .nets import ConvLayer, PooledEDCNN, pool_schedule, truncate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """m sample pairs with inputs in the unit cube and |y_i| <= M."""

    inputs: np.ndarray = field()
    targets: np.ndarray = field()
    M: float = 1.0

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or len(X) != len(y) or len(y) == 0:
            raise ValueError("need matching nonempty inputs (m,d) and targets (m,)")
        if self.M <= 0:
            raise ValueError("M must be positive")
        if np.any(X < 0.0) or np.any(X > 1.0):
            raise ValueError("inputs must lie in the unit cube")
        if np.any(np.abs(y) > self.M):
            raise ValueError("targets must satisfy |y| <= M")
        X = X.copy()
        y = y.copy()
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @property
    def m(self) -> int:
        return len(self.targets)

    @property
    def d(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; the seed fully determines the run."""

    lr0: float = 0.5
    epochs: int = 600
    restarts: int = 8
    seed: int = 0
    M: float = 1.0
    clamp_risk: bool = False

    def __post_init__(self):
        if self.lr0 <= 0 or self.epochs < 1 or self.restarts < 1 or self.M <= 0:
            raise ValueError("need positive lr0/M, epochs >= 1, restarts >= 1")


@dataclass(frozen=True)
class TrainedModel:
    network: PooledEDCNN
    final_risk: float
    restart_index: int
    restart_risks: tuple

    def __post_init__(self):
        finite = [r for r in self.restart_risks if np.isfinite(r)]
        if finite and self.final_risk > min(finite) + 1e-15:
            raise ValueError("selected restart must attain the minimal risk")

    def manifest(self, config: TrainConfig | None = None) -> dict:
        doc = {
            "final_risk": self.final_risk,
            "restart_index": self.restart_index,
            "restart_risks": list(self.restart_risks),
            "depth": self.network.depth,
            "param_count": sum(
                (self.network.s + 1) + len(layer.bias) for layer in self.network.layers
            )
            + len(self.network.output_weights),
        }
        if config is not None:
            doc["config"] = {
                "lr0": config.lr0,
                "epochs": config.epochs,
                "restarts": config.restarts,
                "seed": config.seed,
                "M": config.M,
                "clamp_risk": config.clamp_risk,
            }
        return doc


# ---------------------------------------------------------------------------
# raw parameter pack (lists of arrays) used inside the training loop


def _net_to_params(net: PooledEDCNN):
    fs = [layer.filter.coeffs.copy() for layer in net.layers]
    bs = [layer.bias.copy() for layer in net.layers]
    return fs, bs, net.output_weights.copy()


def _params_to_net(d, s, pools, fs, bs, a) -> PooledEDCNN:
    layers = tuple(ConvLayer(Filter(f), b) for f, b in zip(fs, bs))
    return PooledEDCNN(s=s, d=d, layers=layers, pool_sizes=tuple(pools),
                       output_weights=a)


def _forward_batch(fs, bs, pools, a, X):
    """Batched forward pass; returns outputs, final features, and caches."""
    V = X
    caches = []
    s = len(fs[0]) - 1
    for w, b, u in zip(fs, bs, pools):
        n, D = V.shape
        Z = np.zeros((n, D + s))
        for i in range(s + 1):
            Z[:, i : i + D] += w[i] * V
        Z += b
        R = np.maximum(Z, 0.0)
        if u > 1:
            k = R.shape[1] // u
            blocks = R[:, : k * u].reshape(n, k, u)
            arg = blocks.argmax(axis=2)
            out = np.take_along_axis(blocks, arg[:, :, None], axis=2)[:, :, 0]
            caches.append((V, Z, arg))
            V = out
        else:
            caches.append((V, Z, None))
            V = R
    return V @ a, V, caches


def _backward_batch(fs, bs, pools, a, X, resid, VL, caches):
    """Gradients of mean(resid * (f(x)-y)) given resid = 2*(f(x)-y)/m."""
    s = len(fs[0]) - 1
    da = VL.T @ resid
    dV = np.outer(resid, a)
    gfs = [None] * len(fs)
    gbs = [None] * len(fs)
    for ell in range(len(fs) - 1, -1, -1):
        Vin, Z, arg = caches[ell]
        u = pools[ell]
        if u > 1:
            n = len(Vin)
            k = Z.shape[1] // u
            dR = np.zeros((n, Z.shape[1]))
            blocks = dR[:, : k * u].reshape(n, k, u)
            np.put_along_axis(blocks, arg[:, :, None], dV[:, :, None], axis=2)
        else:
            dR = dV
        dZ = dR * (Z > 0.0)
        gbs[ell] = dZ.sum(axis=0)
        D = Vin.shape[1]
        gfs[ell] = np.array(
            [(dZ[:, i : i + D] * Vin).sum() for i in range(s + 1)]
        )
        dV = np.zeros_like(Vin)
        w = fs[ell]
        for i in range(s + 1):
            dV += w[i] * dZ[:, i : i + D]
    return gfs, gbs, da


def empirical_risk(net: PooledEDCNN, data: Dataset, clamp_M: float | None = None) -> float:
    """Mean squared residual, optionally with outputs clamped to [-M, M]."""
    from .nets import eval_edcnn_batch

    y = eval_edcnn_batch(net, data.inputs)
    if clamp_M is not None:
        y = truncate(y, clamp_M)
    r = y - data.targets
    return float(r @ r) / data.m


def grad_empirical_risk(net: PooledEDCNN, data: Dataset):
    """Exact reverse-mode gradient of the (unclamped) empirical risk.

    Returns (filter_grads, bias_grads, output_grad) matching the network's
    parameter layout.
    """
    fs, bs, a = _net_to_params(net)
    pools = net.pool_sizes
    y, VL, caches = _forward_batch(fs, bs, pools, a, data.inputs)
    resid = 2.0 * (y - data.targets) / data.m
    return _backward_batch(fs, bs, pools, a, data.inputs, resid, VL, caches)


def _risk_params(fs, bs, pools, a, X, t) -> float:
    y, _, _ = _forward_batch(fs, bs, pools, a, X)
    r = y - t
    return float(r @ r) / len(t)


def _init_params(rng, d, s, L, pools):
    """Kink-spreading first layer, near-identity deeper layers.

    The first layer's random biases spread the ReLU kinks across the input
    range; deeper layers start near the delta filter so depth does not
    degrade trainability.
    """
    fs, bs = [], []
    width = d
    for ell in range(L):
        width += s
        if ell == 0:
            w = rng.uniform(-1.0, 1.0, s + 1) / np.sqrt(s + 1)
            b = rng.uniform(-1.0, 1.0, width) / np.sqrt(s + 1)
        else:
            w = np.zeros(s + 1)
            w[0] = 1.0
            w += rng.uniform(-1.0, 1.0, s + 1) * 0.05
            b = rng.uniform(0.0, 0.1, width)
        fs.append(w)
        bs.append(b)
        width //= pools[ell]
    a = rng.uniform(-1.0, 1.0, width) / np.sqrt(width)
    return fs, bs, a


def _descend(fs, bs, pools, a, X, t, lr0, epochs):
    """Line-searched full-batch descent; returns final risk and parameters."""
    lr = lr0
    risk = _risk_params(fs, bs, pools, a, X, t)
    prev = risk
    for _ in range(epochs):
        y, VL, caches = _forward_batch(fs, bs, pools, a, X)
        resid = 2.0 * (y - t) / len(t)
        risk = float((y - t) @ (y - t)) / len(t)
        if not np.isfinite(risk):
            return np.inf, (fs, bs, a)
        if risk > prev + 1e-12:
            log.warning("risk increased within an epoch: %.3e -> %.3e", prev, risk)
        prev = risk
        gfs, gbs, da = _backward_batch(fs, bs, pools, a, X, resid, VL, caches)
        stepped = False
        while lr > 1e-13:
            nfs = [w - lr * g for w, g in zip(fs, gfs)]
            nbs = [b - lr * g for b, g in zip(bs, gbs)]
            na = a - lr * da
            nr = _risk_params(nfs, nbs, pools, na, X, t)
            if nr < risk:
                fs, bs, a = nfs, nbs, na
                prev = nr
                lr *= 1.25
                stepped = True
                break
            lr *= 0.5
        if not stepped:
            break
    return _risk_params(fs, bs, pools, a, X, t), (fs, bs, a)


def erm_train(data: Dataset, L: int, s: int, config: TrainConfig,
              extra_inits=None) -> TrainedModel:
    """Best-of-restarts approximate empirical risk minimizer over the depth-L
    family with the canonical pooling schedule.

    ``extra_inits`` optionally adds warm-start parameter packs (fs, bs, a) as
    additional restarts; each restart is seeded independently of the restart
    count so adding restarts can only improve the returned risk.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    pools = pool_schedule(data.d, s, L)
    X, t = data.inputs, data.targets
    risks = []
    best = None
    packs = [None] * config.restarts + list(extra_inits or [])
    for idx, pack in enumerate(packs):
        if pack is None:
            rng = np.random.default_rng([config.seed, idx])
            fs, bs, a = _init_params(rng, data.d, s, L, pools)
        else:
            fs = [w.copy() for w in pack[0]]
            bs = [b.copy() for b in pack[1]]
            a = pack[2].copy()
        risk, (fs, bs, a) = _descend(fs, bs, pools, a, X, t, config.lr0,
                                     config.epochs)
        if not np.isfinite(risk):
            log.warning("restart %d diverged; discarded", idx)
            risks.append(np.inf)
            continue
        risks.append(risk)
        if best is None or risk < best[0]:
            best = (risk, idx, (fs, bs, a))
    if best is None:
        raise NumericalError("all restarts diverged")
    risk, idx, (fs, bs, a) = best
    net = _params_to_net(data.d, s, pools, fs, bs, a)
    return TrainedModel(network=net, final_risk=risk, restart_index=idx,
                        restart_risks=tuple(risks))


def excess_risk(net: PooledEDCNN, target_fn, n_mc: int, seed: int = 0,
                M: float | None = None, sampler=None):
    """Monte-Carlo estimate of ||pi_M f - f_rho||^2 under the input law.

    Returns (estimate, standard_error). ``sampler(rng, n)`` draws inputs;
    uniform on the unit cube by default.
    """
    from .nets import eval_edcnn_batch

    rng = np.random.default_rng(seed)
    if sampler is None:
        X = rng.uniform(0.0, 1.0, (n_mc, net.d))
    else:
        X = np.asarray(sampler(rng, n_mc), dtype=float)
    y = eval_edcnn_batch(net, X)
    if M is not None:
        y = truncate(y, M)
    sq = (y - np.asarray(target_fn(X), dtype=float)) ** 2
    est = float(sq.mean())
    stderr = float(sq.std(ddof=1) / np.sqrt(len(sq))) if len(sq) > 1 else 0.0
    return est, stderr

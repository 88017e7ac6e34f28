"""Rate sweeps: approximation error vs depth and excess risk vs sample size.

Each sweep produces a RateTable (one row per grid point and seed) that can be
written to CSV losslessly and summarized by a log-log slope fit.
"""

from __future__ import annotations

import io
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .nets import eval_edcnn_batch
from .targets import SmoothTarget
from .train import Dataset, TrainConfig, erm_train, excess_risk, _net_to_params

log = logging.getLogger(__name__)

CSV_HEADER = "scale,metric,seed,stderr"


@dataclass(frozen=True)
class RateRow:
    scale: int
    metric: float
    seed: int
    stderr: float


@dataclass(frozen=True)
class RateTable:
    rows: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = tuple(self.rows)
        seen = set()
        for r in rows:
            key = (r.scale, r.seed)
            if key in seen:
                raise ValueError(f"duplicate row for scale={r.scale} seed={r.seed}")
            seen.add(key)
        object.__setattr__(self, "rows", rows)

    def scales(self):
        return sorted({r.scale for r in self.rows})

    def median_by_scale(self):
        out = {}
        for scale in self.scales():
            vals = [r.metric for r in self.rows if r.scale == scale]
            out[scale] = float(np.median(vals))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for r in sorted(self.rows, key=lambda r: (r.scale, r.seed)):
            buf.write(f"{r.scale},{r.metric!r},{r.seed},{r.stderr!r}\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, metadata: dict | None = None) -> "RateTable":
        lines = text.strip().splitlines()
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError(f"expected header {CSV_HEADER!r}")
        rows = []
        for ln in lines[1:]:
            scale, metric, seed, stderr = ln.split(",")
            rows.append(
                RateRow(int(scale), float(metric), int(seed), float(stderr))
            )
        return RateTable(rows=tuple(rows), metadata=metadata or {})


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared frame for rate sweeps; grids must be nonempty and s >= 2."""

    target: str
    grid: tuple
    s: int = 2
    d: int = 1
    noise: float = 0.3
    restarts: int = 8
    epochs: int = 600
    n_mc: int = 100_000
    seeds: tuple = (0, 1, 2)
    train_size: int = 2048

    def __post_init__(self):
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.s < 2:
            raise ValueError("s must be >= 2")
        if list(self.grid) != sorted(set(self.grid)):
            raise ValueError("grid must be strictly increasing")


def _sup_error(net, target: SmoothTarget, d: int, rng) -> float:
    if d == 1:
        X = np.linspace(0.0, 1.0, 10_000).reshape(-1, 1)
    else:
        X = rng.uniform(0.0, 1.0, (100_000, d))
    return float(np.abs(eval_edcnn_batch(net, X) - target(X)).max())


def _extend_params(model, d: int, s: int, L_new: int, pools_new) -> tuple | None:
    """Delta-extend a trained depth-L model to depth L_new (same function).

    Only valid when the pooling schedule of the deeper family agrees on the
    shared prefix and adds no pooling in the new tail; returns None otherwise.
    """
    net = model.network
    L_old = net.depth
    if tuple(pools_new[:L_old]) != net.pool_sizes:
        return None
    if any(u > 1 for u in pools_new[L_old:]):
        return None
    fs, bs, a = _net_to_params(net)
    width = len(a)
    for ell in range(L_old, L_new):
        w = np.zeros(s + 1)
        w[0] = 1.0
        fs.append(w)
        width += s
        bs.append(np.zeros(width))
    a_new = np.zeros(width)
    a_new[: len(a)] = a
    return fs, bs, a_new


def approx_rate_run(target: SmoothTarget, L_grid, s: int, config: ExperimentConfig,
                    seeds=None) -> RateTable:
    """Sup-norm training error of the depth-L family on a dense noise-free
    sample of the target, for each L in the grid and each seed.

    Each seed's run at depth L also warm-starts from its depth-L' model for
    the previous grid value L' (the deeper family contains the shallower one,
    so capacity grows along the grid).
    """
    from .nets import pool_schedule

    seeds = list(config.seeds if seeds is None else seeds)
    d = config.d
    rng = np.random.default_rng(0)
    if d == 1:
        X = np.linspace(0.0, 1.0, config.train_size).reshape(-1, 1)
    else:
        X = np.random.default_rng(1).uniform(0.0, 1.0, (config.train_size, d))
    y = target(X)
    data = Dataset(inputs=X, targets=y, M=max(target.M, 1e-9))
    rows = []
    prev_models = {}
    for L in L_grid:
        pools = pool_schedule(d, s, L)
        for seed in seeds:
            tc = TrainConfig(epochs=config.epochs, restarts=config.restarts,
                             seed=int(np.random.default_rng([seed, L]).integers(2**31)),
                             M=max(target.M, 1e-9))
            extra = []
            if seed in prev_models:
                pack = _extend_params(prev_models[seed], d, s, L, pools)
                if pack is not None:
                    extra.append(pack)
            try:
                model = erm_train(data, L, s, tc, extra_inits=extra)
            except Exception as e:  # training failure is a row, not a crash
                log.warning("training failed at L=%d seed=%d: %s", L, seed, e)
                rows.append(RateRow(int(L), float("nan"), int(seed), 0.0))
                continue
            err = _sup_error(model.network, target, d, rng)
            rows.append(RateRow(int(L), err, int(seed), 0.0))
            prev_models[seed] = model
    return RateTable(
        rows=tuple(rows),
        metadata={"kind": "approx-rate", "target": target.name, "s": s, "d": d},
    )


def depth_rule(m: int, r: float, d: int) -> int:
    """Depth schedule L(m) = ceil(m^(d / (4r + 2d)))."""
    return int(np.ceil(m ** (d / (4.0 * r + 2.0 * d))))


def learn_rate_run(target: SmoothTarget, m_grid, sigma: float, s: int,
                   config: ExperimentConfig, seeds=None) -> RateTable:
    """Excess risk of the approximate ERM at sample sizes m with bounded
    uniform label noise and the theory-driven depth schedule."""
    seeds = list(config.seeds if seeds is None else seeds)
    d = config.d
    M = target.M + sigma
    rows = []
    for m in m_grid:
        L = depth_rule(m, target.r, d)
        for seed in seeds:
            rng = np.random.default_rng([seed, m, 7])
            X = rng.uniform(0.0, 1.0, (int(m), d))
            y = target(X) + rng.uniform(-sigma, sigma, int(m))
            y = np.clip(y, -M, M)
            data = Dataset(inputs=X, targets=y, M=M)
            tc = TrainConfig(epochs=config.epochs, restarts=config.restarts,
                             seed=int(rng.integers(2**31)), M=M)
            try:
                model = erm_train(data, L, s, tc)
            except Exception as e:
                log.warning("training failed at m=%d seed=%d: %s", m, seed, e)
                rows.append(RateRow(int(m), float("nan"), int(seed), 0.0))
                continue
            est, stderr = excess_risk(model.network, target, config.n_mc,
                                      seed=int(rng.integers(2**31)), M=M)
            rows.append(RateRow(int(m), est, int(seed), stderr))
    return RateTable(
        rows=tuple(rows),
        metadata={"kind": "learn-rate", "target": target.name, "s": s, "d": d,
                  "sigma": sigma},
    )


def slope_fit(table: RateTable):
    """Least-squares line through (log scale, log median-metric).

    Nonpositive or non-finite medians are excluded with a warning; at least
    three usable scales are required. Returns (slope, intercept, r_squared).
    """
    med = table.median_by_scale()
    xs, ys = [], []
    for scale, val in med.items():
        if not np.isfinite(val) or val <= 0.0:
            warnings.warn(f"excluding scale {scale}: nonpositive metric {val}")
            continue
        xs.append(np.log(float(scale)))
        ys.append(np.log(val))
    if len(xs) < 3:
        raise ValueError("need at least 3 scales with positive metrics")
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    A = np.vstack([xs, np.ones_like(xs)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, ys, rcond=None)
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    ss_res = float(((ys - A @ np.array([slope, intercept])) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)

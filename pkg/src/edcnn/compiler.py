"""Compile dense affine+ReLU blocks into functionally identical pooled conv chains.

A block sigma(Wx + theta) with W of shape dt x dp becomes L = ceil(dp*dt/(s-1))
expansive conv layers followed by max-pooling with size dp: the rows of W are
stacked (reversed) into one long filter, the filter is factored into short
filters via polynomial roots, and bias vectors keep every hidden pre-activation
nonnegative so the inner ReLUs act as the identity. Row j of W then surfaces at
output position j*dp, and pooling extracts it.

Two numerical safeguards keep 64-bit evaluation exact to ~1e-9 even for
chains of hundreds of layers: factors are reordered so intermediate partial
products stay small (best of bit-reversed-by-root-angle plus a few seeded
shuffles, scored by max prefix*suffix l1 mass), and the accumulated bias image
at each layer is pinned to the minimal certified envelope rather than the
doubly-exponential worst-case schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conv import Filter, _as_vector
from .factorize import NumericalError, factorize_filter
from .nets import ConvLayer, DFCN, PooledEDCNN, eval_dfcn_batch, eval_edcnn_batch

PROBE_TOL = 1e-6
IDENTITY_TOL = 1e-8
_ORDER_SHUFFLES = 8


@dataclass(frozen=True)
class AffineBlock:
    """One dense layer sigma(Wx + theta)."""

    W: np.ndarray = field()
    theta: np.ndarray = field()

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        theta = _as_vector(self.theta, "theta").copy()
        if W.ndim != 2 or not np.all(np.isfinite(W)):
            raise ValueError("W must be a finite matrix")
        if W.shape[0] != len(theta):
            raise ValueError(f"theta dim {len(theta)} != rows {W.shape[0]}")
        W = W.copy()
        W.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "theta", theta)

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class BiasSchedule:
    """Scalar inner-bias schedule certifying nonnegative pre-activations.

    B[l] bounds every entry of the depth-l filter chain applied to inputs
    from the unit cube (product of factor l1 norms), and the inner biases
    double that envelope layer over layer: b_l = 2^(l-1) B_l.
    """

    B: tuple
    inner_biases: tuple

    def __post_init__(self):
        if len(self.B) != len(self.inner_biases) + 1:
            raise ValueError("need B^0..B^L and b^1..b^L")
        if self.B[0] <= 0:
            raise ValueError("B^0 must be positive")


def bias_bounds(factors, d_prime: int, input_bound: float = 1.0) -> BiasSchedule:
    """Envelope recursion B_l = ||w^l||_1 B_{l-1} with b_l = 2^(l-1) B_l.

    ``d_prime`` is the input width the schedule certifies (the bound itself is
    width-independent). Zero factors are rejected: their chains collapse and
    the factorization upstream would have failed anyway.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("factor list must be nonempty")
    if d_prime < 1:
        raise ValueError("d_prime must be >= 1")
    B = [float(input_bound)]
    bs = []
    for i, f in enumerate(factors):
        norm = float(np.abs(f.coeffs).sum())
        if norm == 0.0:
            raise ValueError(f"factor {i} is the zero filter")
        B.append(norm * B[-1])
        bs.append(2.0 ** i * B[-1])
    return BiasSchedule(B=tuple(B), inner_biases=tuple(bs))


def chain_affine_identity(factors, schedule: BiasSchedule, x) -> np.ndarray:
    """Run the ReLU chain and its affine form; they must agree at every layer.

    The ReLU side composes relu(conv + b_l) layer by layer. The affine side
    convolves the running filter product with x and adds the bias image
    accumulated without any activation. Disagreement beyond IDENTITY_TOL
    means the schedule failed to keep a pre-activation nonnegative.
    """
    factors = list(factors)
    x = _as_vector(x, "x")
    v = x
    prefix = np.array([1.0])
    image = np.zeros(len(x))
    for ell, f in enumerate(factors):
        b = schedule.inner_biases[ell]
        v = np.maximum(np.convolve(f.coeffs, v) + b, 0.0)
        prefix = np.convolve(prefix, f.coeffs)
        image = np.convolve(f.coeffs, image) + b
        affine = np.convolve(prefix, x) + image
        gap = np.abs(v - affine).max()
        if gap > IDENTITY_TOL:
            raise NumericalError(
                f"ReLU chain and affine form disagree by {gap:.3e} at layer "
                f"{ell + 1} (bias schedule too small)"
            )
    return v


@dataclass(frozen=True)
class CompileReport:
    """Certification summary for one compiled block or network."""

    depth: int
    layer_widths: tuple
    pool_size: tuple
    probe_count: int
    max_abs_error: float
    status: str
    tolerance: float = PROBE_TOL

    def __post_init__(self):
        if self.status == "ok" and not self.max_abs_error <= self.tolerance:
            raise ValueError("status ok requires max_abs_error <= tolerance")


def stack_rows(W: np.ndarray) -> Filter:
    """Stack the (reversed) rows of W into one filter of bound dp*dt - 1.

    Row j of the filter's Toeplitz matrix at index j*dp reproduces row j of W:
    coefficient u[j*dp - k] = W[j, k] in 1-based terms.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError("W must be a matrix")
    if not np.any(W):
        raise ValueError("zero matrix cannot be stacked (factorization would fail)")
    dt, dp = W.shape
    u = np.zeros(dp * dt)
    for j in range(1, dt + 1):
        u[j * dp - dp : j * dp] = W[j - 1, ::-1]
    return Filter(u)


def _prefix_suffix_score(factors) -> float:
    """Max over cut points of (prefix l1) * (suffix l1) of the factor products."""
    pre = np.empty(len(factors) + 1)
    p = np.array([1.0])
    pre[0] = 1.0
    for i, f in enumerate(factors):
        p = np.convolve(p, f)
        pre[i + 1] = np.abs(p).sum()
        if not np.isfinite(pre[i + 1]):
            return np.inf
    suf = np.empty(len(factors) + 1)
    p = np.array([1.0])
    suf[len(factors)] = 1.0
    for i in range(len(factors) - 1, -1, -1):
        p = np.convolve(p, factors[i])
        suf[i] = np.abs(p).sum()
        if not np.isfinite(suf[i]):
            return np.inf
    return float((pre * suf).max())


def _factor_angle(f: np.ndarray) -> float:
    if len(f) >= 3:
        return abs(float(np.angle(np.roots(f[::-1])[0])))
    if len(f) == 2 and f[1] != 0.0:
        return 0.0 if -f[0] / f[1] >= 0 else np.pi
    return 0.0


def _order_factors(coeff_list):
    """Pick the factor order with the smallest intermediate l1 blow-up.

    Candidates: bit-reversed traversal of the angle-sorted factors (keeps every
    partial product's roots spread around the circle) plus a few seeded
    shuffles. Deterministic for fixed input.
    """
    n = len(coeff_list)
    if n <= 2:
        return list(coeff_list)
    idx = np.argsort([_factor_angle(f) for f in coeff_list], kind="stable")
    nbits = max(1, int(np.ceil(np.log2(n))))
    rev = sorted(range(n), key=lambda i: int(format(i, f"0{nbits}b")[::-1], 2))
    candidates = [[coeff_list[idx[r]] for r in rev]]
    rng = np.random.default_rng(0xEDC)
    for _ in range(_ORDER_SHUFFLES):
        candidates.append([coeff_list[i] for i in rng.permutation(n)])
    best, best_score = None, np.inf
    for cand in candidates:
        score = _prefix_suffix_score(cand)
        if score < best_score:
            best, best_score = cand, score
    return best


def _window_rownorm(prefix: np.ndarray, D: int, window: int) -> np.ndarray:
    """R_j = sum_{k=0..window-1} |prefix[j-k]| for j = 0..D-1."""
    c = np.concatenate([[0.0], np.cumsum(np.abs(prefix))])
    j = np.arange(D)
    lo = np.clip(j - (window - 1), 0, len(prefix))
    hi = np.clip(j + 1, 0, len(prefix))
    return c[hi] - c[lo]


def _zero_block_chain(block: AffineBlock, s: int, L: int, D0: int):
    """Degenerate chain for W = 0: first filter zero, output is sigma(theta)."""
    dt, dp = block.W.shape
    filters = [Filter(np.zeros(s + 1))] + [Filter.delta(bound=s) for _ in range(L - 1)]
    biases = [np.zeros(D0 + (l + 1) * s) for l in range(L)]
    final = biases[-1]
    for j in range(1, dt + 1):
        final[j * dp - 1] = block.theta[j - 1]
    return filters, biases


def _compile_chain(block: AffineBlock, s: int, D0: int, input_bound: float):
    """Core construction: filters + bias vectors + pool size for one block.

    ``D0`` is the physical input width (>= in_dim; entries beyond the logical
    input are assumed zero), ``input_bound`` bounds the magnitude of every
    logical input entry.
    """
    dt, dp = block.W.shape
    if D0 < dp:
        raise ValueError(f"physical width {D0} below logical input dim {dp}")
    L = -((-dp * dt) // (s - 1))
    if not np.any(block.W):
        filters, biases = _zero_block_chain(block, s, L, D0)
        return filters, biases, dp, {"max_image": 0.0, "order_score": 0.0}

    u = stack_rows(block.W)
    result = factorize_filter(u, s)
    if result.depth_used > L:
        raise NumericalError(
            f"factor count {result.depth_used} exceeds target depth {L}"
        )
    chain = _order_factors([f.coeffs for f in result.factors])
    chain += [np.array([1.0])] * (L - len(chain))  # delta padding to depth L
    filters = [Filter(c).with_bound(s) for c in chain]

    kappa = 1e-9
    eta = 1e-12 * max(1.0, input_bound)
    prefix = np.array([1.0])
    image = np.zeros(D0)  # accumulated bias image, pinned to the envelope
    biases = []
    max_image = 0.0
    for ell in range(L - 1):
        prefix = np.convolve(prefix, chain[ell])
        D_ell = D0 + (ell + 1) * s
        envelope = (
            input_bound * _window_rownorm(prefix, D_ell, dp) * (1.0 + kappa) + eta
        )
        biases.append(envelope - np.convolve(filters[ell].coeffs, image))
        image = envelope
        max_image = max(max_image, float(envelope.max()))

    prefix = np.convolve(prefix, chain[L - 1])
    D_L = D0 + L * s
    if dt * dp > D_L:
        raise NumericalError("final width too small for signal extraction")
    envelope = input_bound * _window_rownorm(prefix, D_L, dp) * (1.0 + kappa) + eta
    carried = np.convolve(filters[L - 1].coeffs, image)
    final = -carried - envelope
    for j in range(1, dt + 1):
        final[j * dp - 1] = block.theta[j - 1] - carried[j * dp - 1]
    biases.append(final)
    return filters, biases, dp, {
        "max_image": max_image,
        "order_score": _prefix_suffix_score([f.coeffs for f in filters]),
    }


def _probe_inputs(dim: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (count, dim))
    if dim <= 10:
        verts = np.array(
            np.meshgrid(*([[0.0, 1.0]] * dim), indexing="ij")
        ).reshape(dim, -1).T
        X = np.vstack([X, verts])
    return X


def compile_block(block: AffineBlock, s: int, probe_count: int = 1000,
                  probe_seed: int = 0):
    """Compile sigma(Wx + theta) into conv layers plus one pooling step.

    Returns (layers, pool_size, report). The pooled output of the chain equals
    sigma(Wx + theta) in its first out_dim coordinates on every probe from the
    unit cube; trailing pooled coordinates are exactly zero.
    """
    if s < 2:
        raise ValueError("s must be >= 2")
    filters, biases, pool, stats = _compile_chain(block, s, block.in_dim, 1.0)
    layers = tuple(ConvLayer(f, b) for f, b in zip(filters, biases))

    X = _probe_inputs(block.in_dim, probe_count, probe_seed)
    got = _run_chain_batch(filters, biases, pool, X)
    want = np.maximum(X @ block.W.T + block.theta, 0.0)
    err = float(np.abs(got[:, : block.out_dim] - want).max())
    trailing = float(np.abs(got[:, block.out_dim :]).max()) if got.shape[1] > block.out_dim else 0.0
    widths = tuple(block.in_dim + s * (l + 1) for l in range(len(filters)))
    report = CompileReport(
        depth=len(filters),
        layer_widths=widths,
        pool_size=(pool,),
        probe_count=len(X),
        max_abs_error=err,
        status="ok" if err <= PROBE_TOL and trailing <= 1e-10 else "failed",
    )
    if report.status != "ok":
        raise NumericalError(
            f"compiled block misses target: max probe error {err:.3e}, "
            f"trailing residue {trailing:.3e}"
        )
    return layers, pool, report


def _run_chain_batch(filters, biases, pool, X):
    V = np.asarray(X, dtype=float)
    s = filters[0].support_bound
    for f, b in zip(filters, biases):
        n, D = V.shape
        Z = np.zeros((n, D + s))
        for i in range(s + 1):
            Z[:, i : i + D] += f.coeffs[i] * V
        Z += b
        V = np.maximum(Z, 0.0)
    k = V.shape[1] // pool
    return V[:, : k * pool].reshape(len(V), k, pool).max(axis=2)


def compile_dfcn(net: DFCN, s: int, probe_count: int = 1000, probe_seed: int = 0):
    """Compile a dense ReLU network into one pooled conv net computing the
    same function, certified on unit-cube probes.

    Returns (PooledEDCNN, CompileReport). Raises NumericalError with the
    measured error when certification fails.
    """
    if s < 2:
        raise ValueError("s must be >= 2")
    d = net.input_dim
    filters_all = []
    biases_all = []
    pools_all = []
    D = d  # physical width entering the next block
    bound = 1.0  # sup bound on logical input entries
    for W, theta in net.affine_layers:
        block = AffineBlock(W, theta)
        filters, biases, pool, _ = _compile_chain(block, s, D, bound)
        filters_all.extend(filters)
        biases_all.extend(biases)
        pools_all.extend([1] * (len(filters) - 1) + [pool])
        D = (D + len(filters) * s) // pool
        bound = float(np.abs(W).sum(axis=1).max() * bound + np.abs(theta).max())
        bound = max(bound, 1e-9)

    out = np.zeros(D)
    out[: len(net.output_weights)] = net.output_weights
    compiled = PooledEDCNN(
        s=s,
        d=d,
        layers=tuple(ConvLayer(f, b) for f, b in zip(filters_all, biases_all)),
        pool_sizes=tuple(pools_all),
        output_weights=out,
    )

    X = _probe_inputs(d, probe_count, probe_seed)
    err = float(np.abs(eval_edcnn_batch(compiled, X) - eval_dfcn_batch(net, X)).max())
    pre_widths, _ = compiled.widths()
    report = CompileReport(
        depth=compiled.depth,
        layer_widths=tuple(pre_widths),
        pool_size=tuple(u for u in pools_all if u > 1),
        probe_count=len(X),
        max_abs_error=err,
        status="ok" if err <= PROBE_TOL else "failed",
    )
    if report.status != "ok":
        raise NumericalError(
            f"compiled network misses source DFCN by {err:.3e} on probes"
        )
    return compiled, report

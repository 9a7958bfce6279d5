"""Feedforward inversion of the shadow model and recovery metrics.

A layer is inverted with ``relu(W.T @ x + b)``; the negative scalar bias b
zeroes the estimation noise off the true support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import derive_seed, matvec_t, relu
from .model import HiddenSpec, ShadowNet, generate_deep_batch, sample_hidden

BIAS_MODES = ("formula", "oracle", "calibrated")
SUPPORT_THRESHOLD = 1e-9
CALIBRATION_GRID = tuple(np.round(np.arange(0.25, 4.0 + 1e-9, 0.25), 2))
# substream tags keeping calibration and evaluation trials apart
CALIBRATION_TAG = 0xCA11B
EVALUATION_TAG = 0xE7A1


@dataclass(frozen=True)
class BiasSpec:
    """Bias rule: formula constant c, the true-support oracle, or a calibrated c."""

    c: float = 1.0
    mode: str = "formula"

    def __post_init__(self):
        if self.mode not in BIAS_MODES:
            raise ValueError(f"bias mode must be one of {BIAS_MODES}, got {self.mode!r}")
        if not self.c > 0:
            raise ValueError(f"bias constant c must be positive, got {self.c}")


@dataclass(frozen=True)
class InferenceReport:
    rel_sq_error: float
    linf_error: float
    precision: float
    recall: float
    exact_support: bool


def formula_bias(c: float, t: float, n: int, norm_h: float) -> float:
    """-c * sqrt(ln(max(n, 3)) / t) * norm_h; c may be 0."""
    return -c * math.sqrt(math.log(max(n, 3)) / t) * norm_h


def choose_bias(spec: BiasSpec, t: float, n: int, norm_h: float, pre_activation=None, support=None) -> float:
    """Scalar bias for one layer.

    formula and calibrated modes use :func:`formula_bias` with ``spec.c``.
    oracle mode needs the raw ``W.T @ x`` and the true support, and returns
    minus the largest off-support value so exactly the support survives
    whenever it can.
    """
    if t < 1:
        raise ValueError(f"t must be at least 1, got {t}")
    if norm_h < 0:
        raise ValueError(f"norm_h must be nonnegative, got {norm_h}")
    if spec.mode == "oracle":
        if pre_activation is None or support is None:
            raise ValueError("oracle bias needs pre_activation and support")
        pre = np.asarray(pre_activation, dtype=np.float64)
        off = np.ones(pre.shape[0], dtype=bool)
        off[np.asarray(support, dtype=np.int64)] = False
        return -float(pre[off].max()) if off.any() else 0.0
    return formula_bias(spec.c, t, n, norm_h)


def infer_layer(W, x, b: float) -> np.ndarray:
    """relu(W.T @ x + b)."""
    return relu(matvec_t(W, x) + b)


def infer_layer_dropout(W, x_dropped, b2: float) -> np.ndarray:
    """relu(2 W.T @ x + b2) for an input with half its coordinates dropped."""
    return infer_layer(W, 2.0 * np.asarray(x_dropped, dtype=np.float64), b2)


def infer_deep(net: ShadowNet, x, biases) -> list:
    """Bottom-up inversion; returns [h~^1, ..., h~^l]."""
    biases = list(biases)
    if len(biases) != net.depth:
        raise ValueError(f"need {net.depth} biases, got {len(biases)}")
    out, h = [], np.asarray(x, dtype=np.float64)
    for j in range(net.depth):
        h = infer_layer(net.weights[j], h, biases[j])
        out.append(h)
    return out


def infer_deep_batch(net: ShadowNet, X, biases) -> list:
    """Row-batched :func:`infer_deep`; ``biases`` is (depth,) or (depth, rows)."""
    H = np.atleast_2d(np.asarray(X, dtype=np.float64))
    B = np.asarray(biases, dtype=np.float64)
    out = []
    for j in range(net.depth):
        bj = B[j][:, None] if B.ndim == 2 else B[j]
        H = relu(H @ net.weights[j] + bj)
        out.append(H)
    return out


def _pair(h_est, h):
    a = np.asarray(h_est, dtype=np.float64)
    b = np.asarray(h, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def relative_sq_error(h_est, h) -> float:
    """||h_est - h||^2 / ||h||^2."""
    a, b = _pair(h_est, h)
    denom = float(b @ b)
    if denom == 0.0:
        raise ValueError("relative error undefined for h = 0")
    d = a - b
    return float(d @ d) / denom


def linf_error(h_est, h) -> float:
    a, b = _pair(h_est, h)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def support_metrics(h_est, h, threshold: float = SUPPORT_THRESHOLD):
    """(precision, recall, exact) of {i: h_est[i] > threshold} against supp(h).

    An empty prediction has precision 1 and an empty truth has recall 1.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    a, b = _pair(h_est, h)
    pred = a > threshold
    true = b != 0
    hits = int(np.count_nonzero(pred & true))
    npred, ntrue = int(pred.sum()), int(true.sum())
    precision = hits / npred if npred else 1.0
    recall = hits / ntrue if ntrue else 1.0
    return precision, recall, bool(np.array_equal(pred, true))


def inference_report(h_est, h, threshold: float = SUPPORT_THRESHOLD) -> InferenceReport:
    p, r, exact = support_metrics(h_est, h, threshold)
    return InferenceReport(relative_sq_error(h_est, h), linf_error(h_est, h), p, r, exact)


def layer_bias_terms(net: ShadowNet):
    """Per-layer sqrt(ln(max(n,3))/t) factors; bias_j = -c_j * factor_j * ||h^j||."""
    return np.array([math.sqrt(math.log(max(net.widths[j], 3)) / net.sparsities[j])
                     for j in range(net.depth)])


def sample_round_trips(net: ShadowNet, hidden_spec: HiddenSpec, trials: int, seed):
    """Draw ``trials`` (h_top, generated layers) pairs from substreams of ``seed``.

    Returns the layer list of :func:`generate_deep_batch` and the top supports.
    """
    if hidden_spec.dim != net.widths[-1]:
        raise ValueError(f"hidden dim {hidden_spec.dim} does not match top width {net.widths[-1]}")
    hs = [sample_hidden(hidden_spec, derive_seed(seed, 2 * i)) for i in range(trials)]
    gen_seeds = [derive_seed(seed, 2 * i + 1) for i in range(trials)]
    layers = generate_deep_batch(net, np.stack([h.vec for h in hs]), gen_seeds)
    return layers, [h.support for h in hs]


def exact_top_rate(net: ShadowNet, layers, cs, threshold: float = SUPPORT_THRESHOLD) -> float:
    """Fraction of round trips whose top support is recovered exactly with constants ``cs``."""
    norms = np.stack([np.linalg.norm(layers[net.depth - j], axis=1) for j in range(1, net.depth + 1)])
    biases = -np.asarray(cs)[:, None] * layer_bias_terms(net)[:, None] * norms
    top = infer_deep_batch(net, layers[-1], biases)[-1]
    truth = layers[0] != 0
    return float(np.mean(np.all((top > threshold) == truth, axis=1)))


def _grid_search(net: ShadowNet, layers, grid, threshold: float):
    """Exhaustive search over grid^depth; each layer's inference is reused by all upper choices."""
    depth = net.depth
    norms = [np.linalg.norm(layers[depth - j], axis=1) for j in range(1, depth + 1)]
    terms = layer_bias_terms(net)
    truth = layers[0] != 0
    best = (-1.0, None)

    def visit(j, H, cs):
        nonlocal best
        pre = H @ net.weights[j]
        for c in grid:
            out = relu(pre - (c * terms[j] * norms[j])[:, None])
            if j + 1 < depth:
                visit(j + 1, out, cs + (float(c),))
            else:
                rate = float(np.mean(np.all((out > threshold) == truth, axis=1)))
                if rate > best[0]:
                    best = (rate, cs + (float(c),))

    visit(0, layers[-1], ())
    return best


def calibrate_bias(net: ShadowNet, hidden_spec: HiddenSpec, trials: int, seed,
                   grid=CALIBRATION_GRID, threshold: float = SUPPORT_THRESHOLD) -> tuple:
    """Per-layer bias constants maximizing the exact top-support rate.

    Round trips come from the calibration substream of ``seed``, disjoint
    from the :data:`EVALUATION_TAG` trials. Nets up to depth 3 search the
    full product grid (first maximizer in grid order wins); deeper nets
    use coordinate ascent from all ones. Returns one constant per layer,
    bottom first.
    """
    if trials < 10:
        raise ValueError(f"calibration needs at least 10 trials, got {trials}")
    layers, _ = sample_round_trips(net, hidden_spec, trials, derive_seed(seed, CALIBRATION_TAG))
    if net.depth <= 3:
        return _grid_search(net, layers, grid, threshold)[1]
    cs = [1.0] * net.depth
    best = exact_top_rate(net, layers, cs, threshold)
    for _ in range(4):
        moved = False
        for j in range(net.depth):
            for c in grid:
                trial = list(cs)
                trial[j] = float(c)
                rate = exact_top_rate(net, layers, trial, threshold)
                if rate > best:
                    best, cs, moved = rate, trial, True
        if not moved:
            break
    return tuple(cs)

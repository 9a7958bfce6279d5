"""Headline experiments: error scaling in t, dropout robustness, two-layer
recovery, deep support recovery, and max-deviation tails."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..core import derive_seed, make_rng
from ..inference import (EVALUATION_TAG, SUPPORT_THRESHOLD, calibrate_bias, exact_top_rate,
                         formula_bias, infer_deep_batch, layer_bias_terms, sample_round_trips)
from ..model import HiddenSpec, LayerGenSpec, ShadowNet
from ..parallel import parallel_map
from .estimators import McEstimate, SlopeFit, TailReport, fit_power_law

SCALING_BIAS_C = 0.5


@dataclass(frozen=True)
class ScalingResult:
    t_values: tuple
    mean_errors: tuple
    std_errors: tuple
    fit: SlopeFit
    per_trial: np.ndarray  # (trials, len(t_values))


def _binary_h(rng, m: int, k: int) -> np.ndarray:
    h = np.zeros(m)
    h[rng.choice(m, size=k, replace=False)] = 1.0
    return h


def _scaling_trial(args):
    seed, k, t_values, m, n, c, dropout_half = args
    rng = make_rng(seed)
    W = rng.standard_normal((n, m))
    h = _binary_h(rng, m, k)
    pre = W @ h
    nh2 = float(h @ h)
    # one uniform stream for every t couples the masks monotonically
    u_keep = rng.random(n)
    u_drop = rng.random(n)
    base, dropped = [], []
    for t in t_values:
        x = np.maximum(2.0 / t * pre, 0.0) * (u_keep < t / n)
        est = np.maximum(W.T @ x + formula_bias(c, t, n, math.sqrt(nh2)), 0.0)
        base.append(float(np.sum((est - h) ** 2)) / nh2)
        if dropout_half:
            xd = x * (u_drop < 0.5)
            est = np.maximum(2.0 * (W.T @ xd) + formula_bias(c, t / 2.0, n, math.sqrt(nh2)), 0.0)
            dropped.append(float(np.sum((est - h) ** 2)) / nh2)
    return base, dropped


def scaling_experiment(k: int, t_values, m: int, n: int, trials_per_t: int, seed,
                       bias_c: float = SCALING_BIAS_C, threads: int | None = 1) -> ScalingResult:
    """Mean relative squared error of one-layer inversion at each t, with a log-log fit.

    Trial i draws W, h and the mask stream from derive_seed(seed, i) and
    reuses them for every t, so the t-values are paired.
    """
    t_values = tuple(int(t) for t in t_values)
    if len(t_values) < 3:
        raise ValueError("need at least 3 t values")
    if not k < min(t_values) or max(t_values) > n or k > m:
        raise ValueError(f"need k < min(t) and max(t) <= n and k <= m; got k={k}, t={t_values}, m={m}, n={n}")
    if trials_per_t < 2:
        raise ValueError("need at least 2 trials per t")
    args = [(derive_seed(seed, i), k, t_values, m, n, bias_c, False) for i in range(trials_per_t)]
    errs = np.array([r[0] for r in parallel_map(_scaling_trial, args, threads)])
    means = errs.mean(axis=0)
    ses = errs.std(axis=0, ddof=1) / math.sqrt(trials_per_t)
    fit = fit_power_law(t_values, means, ses)
    return ScalingResult(t_values, tuple(means.tolist()), tuple(ses.tolist()), fit, errs)


@dataclass(frozen=True)
class DropoutResult:
    median_no_drop: float
    median_drop: float
    ratio: float
    errors_no_drop: np.ndarray
    errors_drop: np.ndarray


def dropout_experiment(k: int, t: int, m: int, n: int, n_trials: int, seed,
                       bias_c: float = SCALING_BIAS_C, threads: int | None = 1) -> DropoutResult:
    """Paired trials: plain inversion vs. half of x dropped and relu(2 W^T x + b(t/2))."""
    if n_trials < 2 or not k < t <= n:
        raise ValueError("need n_trials >= 2 and k < t <= n")
    args = [(derive_seed(seed, i), k, (t,), m, n, bias_c, True) for i in range(n_trials)]
    res = parallel_map(_scaling_trial, args, threads)
    a = np.array([r[0][0] for r in res])
    b = np.array([r[1][0] for r in res])
    ma, mb = float(np.median(a)), float(np.median(b))
    return DropoutResult(ma, mb, mb / ma if ma > 0 else math.inf, a, b)


def _two_layer_trial(args):
    seed, g, q, k, t, m, n, coord, c_h, c_g = args
    rng = make_rng(seed)
    p = g.size
    U = rng.standard_normal((m, p))
    W = rng.standard_normal((n, m))
    keep_h = np.zeros(m)
    keep_h[rng.choice(m, size=k, replace=False)] = 1.0
    h = np.maximum(2.0 / k * (U @ g), 0.0) * keep_h
    keep_x = np.zeros(n)
    keep_x[rng.choice(n, size=t, replace=False)] = 1.0
    x = np.maximum(2.0 / t * (W @ h), 0.0) * keep_x
    h_est = np.maximum(W.T @ x + formula_bias(c_h, t, n, float(np.linalg.norm(h))), 0.0)
    g_est = np.maximum(U.T @ h_est + formula_bias(c_g, k, m, float(np.linalg.norm(g))), 0.0)
    return float((g_est[coord] - g[coord]) ** 2)


def two_layer_experiment(q: int, k: int, t: int, p: int, m: int, n: int, n_trials: int, seed,
                         coord: int = 0, c_h: float = 0.0, c_g: float = 0.0, g=None,
                         threads: int | None = 1) -> McEstimate:
    """Squared error at one coordinate of g after generating g -> h -> x and inverting twice.

    h = s_k(relu((2/k) U g)) and x = s_t(relu((2/t) W h)) with fixed-size
    subset masks. g defaults to ones on its first q coordinates. Bias
    constants c_h, c_g enter the formula bias and default to 0.
    """
    if not (q <= p and k <= m and t <= n):
        raise ValueError(f"inconsistent dimensions: q={q}, p={p}, k={k}, m={m}, t={t}, n={n}")
    if not q < k < t < q * q:
        warnings.warn(f"(q, k, t) = {(q, k, t)} outside the advisory regime q < k < t < q^2", stacklevel=2)
    if g is None:
        g = np.zeros(p)
        g[:q] = 1.0
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (p,):
        raise ValueError(f"g has shape {g.shape}, expected ({p},)")
    if not 0 <= coord < p:
        raise ValueError(f"coord {coord} out of range")
    args = [(derive_seed(seed, i), g, q, k, t, m, n, coord, c_h, c_g) for i in range(n_trials)]
    return McEstimate.from_samples(parallel_map(_two_layer_trial, args, threads))


@dataclass(frozen=True)
class SupportResult:
    success_count: int
    n_trials: int
    topk_success: int
    bias_constants: tuple

    @property
    def rate(self) -> float:
        return self.success_count / self.n_trials


def support_recovery_experiment(widths, top_sparsity: int, n_trials: int, seed,
                                resample_net_every: int = 0, keep_fraction: float = 1.0,
                                calibration_trials: int = 1000) -> SupportResult:
    """Generate from a random deep net, invert, and count exact top-support recoveries.

    ``widths`` lists n_0 (bottom) to n_l (top). Lower layers keep
    ``keep_fraction`` of their coordinates (Bernoulli). Per-layer bias
    constants come from :func:`calibrate_bias` on each net. The count of
    trials whose top-k pre-activations hit the support is a diagnostic.
    """
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or any(widths[j] <= widths[j + 1] for j in range(len(widths) - 1)):
        raise ValueError(f"widths must decrease from bottom to top, got {widths}")
    if not 1 <= top_sparsity <= widths[-1]:
        raise ValueError(f"top_sparsity must lie in [1, {widths[-1]}]")
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must lie in (0, 1]")
    block = n_trials if resample_net_every <= 0 else int(resample_net_every)
    hidden = HiddenSpec(widths[-1], top_sparsity)
    sparsities = tuple(max(1, round(keep_fraction * w)) for w in widths[:-1]) + (top_sparsity,)
    success = topk = 0
    cs = ()
    for bi, start in enumerate(range(0, n_trials, block)):
        size = min(block, n_trials - start)
        net_seed = derive_seed(seed, bi)
        net = ShadowNet.random(widths, sparsities, net_seed)
        cs = calibrate_bias(net, hidden, calibration_trials, net_seed)
        layers, supports = sample_round_trips(net, hidden, size, derive_seed(net_seed, EVALUATION_TAG))
        success += int(round(exact_top_rate(net, layers, cs) * size))
        norms = np.stack([np.linalg.norm(layers[net.depth - j], axis=1) for j in range(1, net.depth + 1)])
        biases = -np.asarray(cs)[:, None] * layer_bias_terms(net)[:, None] * norms
        below = infer_deep_batch(net, layers[-1], biases)[-2] if net.depth > 1 else layers[-1]
        pre_top = below @ net.weights[-1]
        ranked = np.argsort(-pre_top, axis=1, kind="stable")[:, :top_sparsity]
        topk += sum(set(r.tolist()) == set(s.tolist()) for r, s in zip(ranked, supports))
    return SupportResult(success, n_trials, int(topk), cs)


def concentration_tail(layer: LayerGenSpec, hidden: HiddenSpec, n_trials: int, seed, W=None,
                       c: float = 1.0, h=None) -> TailReport:
    """Per-trial max_i |h_hat_i - h_i| with h_hat = W^T x over fresh (W, mask).

    Reports the 50/90/99th percentiles and the fraction of trials above
    c * sqrt(k/t) * ln(n). A fixed ``W`` removes the weight randomness.
    """
    if n_trials < 200:
        raise ValueError(f"need at least 200 trials, got {n_trials}")
    if h is None:
        h = np.zeros(hidden.dim)
        h[: hidden.sparsity] = 1.0
    h = np.asarray(h, dtype=np.float64)
    n, t, k = layer.out_dim, layer.dropout.t, hidden.sparsity
    vals = np.empty(n_trials)
    for i in range(n_trials):
        rng = make_rng(derive_seed(seed, i))
        Wi = rng.standard_normal((n, layer.in_dim)) if W is None else np.asarray(W, dtype=np.float64)
        x = np.maximum(layer.alpha * (Wi @ h), 0.0) * layer.dropout.mask(derive_seed(seed, n_trials + i))
        vals[i] = np.max(np.abs(Wi.T @ x - h))
    thr = c * math.sqrt(k / t) * math.log(n)
    qs = {q: float(np.percentile(vals, q)) for q in (50, 90, 99)}
    return TailReport(qs, float(np.mean(vals > thr)), thr, vals)


def linear_model_check(n: int, m: int, n_trials: int, seed, W=None, c: float = 1.0) -> TailReport:
    """Max-norm error of h_hat = W^T (W h) / n for h uniform on {0,1}^m."""
    if n <= m:
        raise ValueError(f"need n > m, got n={n}, m={m}")
    if n_trials < 2:
        raise ValueError("need at least 2 trials")
    vals = np.empty(n_trials)
    for i in range(n_trials):
        rng = make_rng(derive_seed(seed, i))
        Wi = rng.standard_normal((n, m)) if W is None else np.asarray(W, dtype=np.float64)
        h = (rng.random(m) < 0.5).astype(np.float64)
        vals[i] = np.max(np.abs(Wi.T @ (Wi @ h) / n - h))
    thr = c * math.sqrt(m / n) * math.sqrt(math.log(max(m, 3)))
    qs = {q: float(np.percentile(vals, q)) for q in (50, 90, 99)}
    return TailReport(qs, float(np.mean(vals > thr)), thr, vals)

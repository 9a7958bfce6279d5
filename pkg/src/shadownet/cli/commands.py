"""Subcommand implementations. Each returns a Report without writing it."""
from __future__ import annotations

import math
import os
import time
import warnings

import numpy as np

from ..core import derive_seed, make_rng
from ..diagnostics import bias_uniformity, histogram, singular_spectrum, weight_moments
from ..inference import (BiasSpec, EVALUATION_TAG, calibrate_bias, choose_bias, inference_report,
                         infer_deep, layer_bias_terms)
from ..model import HiddenSpec, ShadowNet, generate_deep, sample_hidden
from ..theory.estimators import fit_power_law
from ..theory.experiments import (dropout_experiment, scaling_experiment, support_recovery_experiment,
                                  two_layer_experiment)
from ..theory.suite import lemma_exp_checks, regression_checks, results_table, trend_checks
from ..train import (MlpParams, SynthOptions, TrainConfig, gen_blobs, label_agreement, load_csv,
                     load_idx, mlp_backward, mlp_forward, shadow_synthesize, split, train)
from .config import RunConfig, resolved_parameters
from .report import Report, artifact_version
from .weights import load_weights, net_from_matrices, save_weights

# acceptance thresholds checked under --check
SUPPORT_MIN_RATE = 0.99
SLOPE_RANGE = (-1.25, -0.75)
MIN_R2 = 0.95
DROPOUT_MAX_RATIO = 2.0
TWO_LAYER_SLOPE = (-1.4, -0.6)
KS_MAX, KURT_MAX, KS_NEG_MIN = 0.05, 0.05, 0.5
GRAD_RTOL, TRACK_TOL, AGREE_MARGIN = 1e-4, 0.15, 0.2


def _net(p, seed, sparsities=None):
    widths = tuple(p["widths"])
    if sparsities is None:
        sparsities = tuple(max(1, round(p["keep_fraction"] * w)) for w in widths[:-1]) + (p["top_sparsity"],)
    if p.get("weights"):
        return net_from_matrices(load_weights(p["weights"]), sparsities)
    return ShadowNet.random(widths, sparsities, seed)


def cmd_gen(cfg: RunConfig, p: dict) -> Report:
    net = _net(p, derive_seed(cfg.seed, 0))
    hs = HiddenSpec(net.widths[-1], p["top_sparsity"], p["value_mode"])
    rows = []
    for i in range(p["n_samples"]):
        h = sample_hidden(hs, derive_seed(cfg.seed, 2 * i + 1))
        layers = generate_deep(net, h, derive_seed(cfg.seed, 2 * i + 2))
        for depth_idx, v in enumerate(layers):
            rows.append({"sample": i, "layer": net.depth - depth_idx, "nonzeros": int(np.count_nonzero(v)),
                         "norm": float(np.linalg.norm(v))})
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "net.shdw")
    save_weights(net, path)
    return _report(cfg, p, {"layers": rows}, {"weights_file": "net.shdw", "depth": net.depth})


def cmd_invert(cfg: RunConfig, p: dict) -> Report:
    net = _net(p, derive_seed(cfg.seed, 0))
    hs = HiddenSpec(net.widths[-1], p["top_sparsity"])
    if p["bias_mode"] == "calibrated":
        cs = calibrate_bias(net, hs, p["calibration_trials"], derive_seed(cfg.seed, 0))
    else:
        cs = (p["bias_c"],) * net.depth
    terms = layer_bias_terms(net)
    rows = []
    seed = derive_seed(cfg.seed, EVALUATION_TAG)
    for i in range(p["n_trials"]):
        h = sample_hidden(hs, derive_seed(seed, 2 * i))
        layers = generate_deep(net, h, derive_seed(seed, 2 * i + 1))
        truth = layers[::-1][1:]  # h^1 .. h^l
        if p["bias_mode"] == "oracle":
            biases, cur = [], layers[-1]
            for j in range(net.depth):
                pre = net.weights[j].T @ cur
                b = choose_bias(BiasSpec(1.0, "oracle"), 1, 1, 0.0, pre, np.flatnonzero(truth[j]))
                biases.append(b)
                cur = np.maximum(pre + b, 0.0)
        else:
            biases = [-cs[j] * terms[j] * np.linalg.norm(truth[j]) for j in range(net.depth)]
        est = infer_deep(net, layers[-1], biases)
        r = inference_report(est[-1], truth[-1])
        rows.append({"trial": i, "rel_sq_error": r.rel_sq_error, "linf_error": r.linf_error,
                     "precision": r.precision, "recall": r.recall, "exact_support": r.exact_support})
    exact = sum(r["exact_support"] for r in rows)
    agg = {"bias_mode": p["bias_mode"], "bias_constants": list(cs), "exact_support_count": exact,
           "mean_rel_sq_error": float(np.mean([r["rel_sq_error"] for r in rows]))}
    return _report(cfg, p, {"trials": rows}, agg)


def cmd_scaling(cfg: RunConfig, p: dict) -> Report:
    res = scaling_experiment(p["k"], p["t_values"], p["m"], p["n"], p["trials_per_t"], derive_seed(cfg.seed, 3),
                             p["bias_c"], cfg.threads)
    pts = [{"t": t, "mean_error": e, "std_error": s} for t, e, s in zip(res.t_values, res.mean_errors, res.std_errors)]
    drop = dropout_experiment(p["k"], p["dropout_t"], p["m"], p["n"], p["dropout_trials"], derive_seed(cfg.seed, 4),
                              p["bias_c"], cfg.threads)
    agg = {"slope": res.fit.slope, "intercept": res.fit.intercept, "r_squared": res.fit.r_squared,
           "dropout_median_no_drop": drop.median_no_drop, "dropout_median_drop": drop.median_drop,
           "dropout_ratio": drop.ratio}
    checks = {3: SLOPE_RANGE[0] <= res.fit.slope <= SLOPE_RANGE[1] and res.fit.r_squared >= MIN_R2,
              4: drop.ratio <= DROPOUT_MAX_RATIO}
    return _report(cfg, p, {"points": pts}, agg, checks)


def cmd_lemmas(cfg: RunConfig, p: dict) -> Report:
    exp = lemma_exp_checks(cfg.seed)
    rest = regression_checks(cfg.seed) + trend_checks(cfg.seed)
    rows = results_table(exp + rest)
    agg = {"passed": sum(r["passed"] for r in rows), "total": len(rows)}
    checks = {2: all(r.passed for r in exp if r.name.startswith("lemma_exp")),
              6: all(r.passed for r in rest)}
    return _report(cfg, p, {"checks": rows}, agg, checks)


def cmd_diag(cfg: RunConfig, p: dict) -> Report:
    if p["weights"]:
        W = load_weights(p["weights"])[p["matrix_index"]]
        controls = {}
    else:
        W = make_rng(derive_seed(cfg.seed, 5)).standard_normal((p["rows"], p["cols"]))
        controls = {"identity_ks": singular_spectrum(np.eye(min(p["rows"], p["cols"]))).ks_distance}
    mom = weight_moments(W)
    spec = singular_spectrum(W)
    if p["bias"] is not None:
        b = np.asarray(p["bias"], dtype=np.float64)
    else:
        b = 1.0 + p["bias_noise"] * make_rng(derive_seed(cfg.seed, 6)).uniform(-1.0, 1.0, p["bias_len"])
    bu = bias_uniformity(b)
    hist = histogram(W, p["n_bins"])
    agg = {"mean": mom.mean, "variance": mom.variance, "skewness": mom.skewness,
           "excess_kurtosis": mom.excess_kurtosis, "ks_distance": spec.ks_distance,
           "aspect_ratio": spec.aspect_ratio, "bias_ratio": bu.ratio, "bias_uniform_like": bu.uniform_like,
           **controls}
    tables = {
        "spectrum": [{"index": i, "singular_value_scaled": float(s)} for i, s in enumerate(spec.singular_values_scaled)],
        "histogram": [{"left": float(hist.bin_edges[i]), "right": float(hist.bin_edges[i + 1]), "count": int(c)}
                      for i, c in enumerate(hist.counts)],
    }
    checks = {}
    if not p["weights"]:
        checks[7] = (spec.ks_distance <= KS_MAX and abs(mom.excess_kurtosis) <= KURT_MAX
                     and controls["identity_ks"] >= KS_NEG_MIN and bu.uniform_like)
    return _report(cfg, p, tables, agg, checks)


def cmd_support(cfg: RunConfig, p: dict) -> Report:
    res = support_recovery_experiment(p["widths"], p["top_sparsity"], p["n_trials"], derive_seed(cfg.seed, 7),
                                      p["resample_net_every"], p["keep_fraction"], p["calibration_trials"])
    agg = {"success_count": res.success_count, "n_trials": res.n_trials, "rate": res.rate,
           "topk_success": res.topk_success, "bias_constants": list(res.bias_constants)}
    return _report(cfg, p, {}, agg, {1: res.rate >= SUPPORT_MIN_RATE})


def cmd_twolayer(cfg: RunConfig, p: dict) -> Report:
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in p["k_values"]:
            t = p["t_factor"] * k
            est = two_layer_experiment(p["q"], k, t, p["p"], p["m_factor"] * k, p["n_factor"] * t, p["n_trials"],
                                       derive_seed(cfg.seed, 8), p["coord"], p["c_h"], p["c_g"], threads=cfg.threads)
            rows.append({"k": k, "t": t, "mean_sq_error": est.mean, "std_error": est.std_error})
    fit = fit_power_law([r["k"] for r in rows], [r["mean_sq_error"] for r in rows])
    decreasing = all(b["mean_sq_error"] < a["mean_sq_error"] + 3 * math.hypot(a["std_error"], b["std_error"])
                     for a, b in zip(rows, rows[1:]))
    agg = {"slope": fit.slope, "r_squared": fit.r_squared, "decreasing": decreasing}
    return _report(cfg, p, {"errors": rows}, agg,
                   {5: decreasing and TWO_LAYER_SLOPE[0] <= fit.slope <= TWO_LAYER_SLOPE[1]})


def _dataset(p, seed):
    if p["dataset"] == "blobs":
        return gen_blobs(p["n_per_class"], p["n_classes"], p["dim"], p["spread"], seed)
    if p["dataset"] == "csv":
        return load_csv(p["csv_path"])
    if p["dataset"] == "idx":
        return load_idx(p["idx_images"], p["idx_labels"])
    raise ValueError(f"unknown dataset {p['dataset']!r}")


def gradient_check(params: MlpParams, X, y, eps: float = 1e-5, n_points: int = 3, seed=0) -> float:
    """Max relative error of backprop against central differences over sampled entries."""
    g = mlp_backward(params, X, y)
    rng = make_rng(seed)
    worst = 0.0
    for arrs, grads in ((params.weights, g.weights), (params.biases, g.biases)):
        for A, G in zip(arrs, grads):
            for flat in rng.choice(A.size, size=min(n_points, A.size), replace=False):
                idx = np.unravel_index(flat, A.shape)
                old = A[idx]
                A[idx] = old + eps
                fp = mlp_backward(params, X, y).loss
                A[idx] = old - eps
                fm = mlp_backward(params, X, y).loss
                A[idx] = old
                fd = (fp - fm) / (2 * eps)
                worst = max(worst, abs(fd - G[idx]) / max(abs(fd), abs(G[idx]), 1e-8))
    return worst


def cmd_train(cfg: RunConfig, p: dict) -> Report:
    data = _dataset(p, derive_seed(cfg.seed, 9))
    tr, va = split(data, 1.0 - p["val_fraction"], derive_seed(cfg.seed, 10))
    synth = SynthOptions(p["source_layer"], p["sampling"], p["sampling_keep"], p["smoothing"],
                         tuple(p["image_shape"]) if p["image_shape"] else None, p["rescale"])
    tc = TrainConfig(p["learning_rate"], p["shadow_weight"], tuple(p["reg_lambdas"]), p["masked_regularizer"],
                     p["dropout_ratio"], p["batch_size"], p["epochs"], cfg.seed, synth)
    init = MlpParams.init(tr.dim, p["hidden"][0], p["hidden"][1], tr.n_classes, derive_seed(cfg.seed, 11))
    grad_err = gradient_check(init.copy(), tr.inputs[:20], tr.labels[:20], n_points=p["grad_check_points"],
                              seed=derive_seed(cfg.seed, 12))
    state, hist = train(tc, tr, va, init)
    _, h2, logits = mlp_forward(state.params, va.inputs)
    src = h2 if synth.source_layer == "h2" else logits
    xs = shadow_synthesize(state.params, src, synth, derive_seed(cfg.seed, 13))
    agree = label_agreement(state.params, va.inputs, xs)
    max_gap = max(abs(m["val_error"] - m["synthetic_val_error"]) for m in hist)
    agg = {"grad_check_max_rel_error": grad_err, "initial_val_error": hist[0]["val_error"],
           "final_val_error": hist[-1]["val_error"], "max_real_synthetic_gap": max_gap,
           "label_agreement": agree, "chance": 1.0 / tr.n_classes}
    ok = (grad_err <= GRAD_RTOL and hist[-1]["val_error"] <= hist[0]["val_error"]
          and max_gap <= TRACK_TOL and agree >= 1.0 / tr.n_classes + AGREE_MARGIN)
    return _report(cfg, p, {"epochs": hist}, agg, {8: ok})


def _report(cfg, params, tables, aggregates, checks=None) -> Report:
    echo = {"command": cfg.command, "seed": cfg.seed, "threads": cfg.threads, "check": cfg.check,
            "parameters": params}
    return Report(cfg.command, echo, artifact_version(), tables, aggregates, checks or {})


HANDLERS = {"gen": cmd_gen, "invert": cmd_invert, "scaling": cmd_scaling, "lemmas": cmd_lemmas,
            "diag": cmd_diag, "support": cmd_support, "twolayer": cmd_twolayer, "train": cmd_train}


def run_command(cfg: RunConfig) -> Report:
    """Dispatch ``cfg.command``; errors are re-raised with the command name attached."""
    start = time.perf_counter()
    try:
        report = HANDLERS[cfg.command](cfg, resolved_parameters(cfg))
    except Exception as exc:
        raise RuntimeError(f"{cfg.command}: {exc}") from exc
    report.duration_s = time.perf_counter() - start
    return report

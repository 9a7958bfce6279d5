"""Regression and trend checks over all lemma estimators.

Regression checks compare an estimate against a threshold stored in
``data/lemma_thresholds.json``. The thresholds are produced by
``scripts/calibrate_fixtures.py`` from larger runs on a different seed.
Trend checks sweep the decay variable (sigma, t or n) on paired seeds and
assert the direction with statistical slack.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

from ..core import derive_seed
from ..model import DropoutSpec, HiddenSpec, LayerGenSpec
from .estimators import (LemmaExpParams, LemmaHParams, McEstimate, TwoCorrParams, mc_H,
                         mc_lemma_exp, mc_linear_comb, mc_pairwise_cov, mc_second_moment,
                         mc_two_correlation, variance_check)
from .experiments import concentration_tail, linear_model_check, two_layer_experiment

SUITE_SEED = 2024
FIXTURE_SEED = 777
# suite sample counts; the fixture script multiplies these by ORACLE_FACTOR
SUITE_SIZES = {
    "two_corr": 1_000_000,
    "H": 200_000,
    "pair_cov": 20_000,
    "lin_comb": 20_000,
    "variance": 20_000,
    "concentration": 400,
    "linear_model": 400,
    "two_layer": 300,
}
ORACLE_FACTOR = {"two_corr": 10, "H": 5, "pair_cov": 5, "lin_comb": 5, "variance": 5,
                 "concentration": 5, "linear_model": 5, "two_layer": 5}
# regression estimator -> SUITE_SIZES key
_NAME_TO_SIZE = {"two_corr_gap": "two_corr", "H_abs_sigma100": "H", "pair_cov_k20_t200": "pair_cov",
                 "lin_comb_k16_t256": "lin_comb", "variance_ratio_max": "variance",
                 "concentration_p99": "concentration", "linear_model_median": "linear_model",
                 "two_layer_q5_k100": "two_layer"}
MARGIN_SE = 5.0
TREND_SE = 3.0
HIDDEN_DIM = 64


@dataclass(frozen=True)
class CheckResult:
    name: str
    kind: str  # "regression" or "trend"
    value: float
    threshold: float
    passed: bool
    detail: str = ""


def bernoulli_layer(t: int, m: int = HIDDEN_DIM) -> LayerGenSpec:
    """n = 2t outputs with Bernoulli(1/2) keep, alpha = 2/t."""
    return LayerGenSpec(2 * t, m, DropoutSpec.bernoulli(0.5, 2 * t))


def _percentile_se(values, q: float, seed: int, reps: int = 200) -> float:
    rng = np.random.default_rng(seed)
    v = np.asarray(values)
    boots = [np.percentile(rng.choice(v, size=v.size), q) for _ in range(reps)]
    return float(np.std(boots, ddof=1))


def oracle_sizes() -> dict:
    return {k: v * ORACLE_FACTOR[k] for k, v in SUITE_SIZES.items()}


def regression_values(seed, sizes=None) -> dict:
    """Raw (value, std_error, n) of every regression estimator.

    ``sizes`` maps SUITE_SIZES keys to sample counts; defaults to the suite sizes.
    """
    n = dict(SUITE_SIZES if sizes is None else sizes)
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tc = mc_two_correlation(TwoCorrParams(1.0, 1.0, 10.0), n["two_corr"], derive_seed(seed, 1))
        out["two_corr_gap"] = (tc.gap, tc.gap_std_error, n["two_corr"])
        _, habs = mc_H(LemmaHParams(2.0, 100.0), n["H"], derive_seed(seed, 2))
        out["H_abs_sigma100"] = (habs.mean, habs.std_error, n["H"])
        cov = mc_pairwise_cov(bernoulli_layer(200), HiddenSpec(HIDDEN_DIM, 20), 0, 1, n["pair_cov"], derive_seed(seed, 3))
        out["pair_cov_k20_t200"] = (abs(cov.mean), cov.std_error, n["pair_cov"])
        hid = HiddenSpec(HIDDEN_DIM, 16)
        u = np.zeros(HIDDEN_DIM)
        u[:16] = 1.0
        lc = mc_linear_comb(bernoulli_layer(256), hid, u, n["lin_comb"], derive_seed(seed, 4))
        out["lin_comb_k16_t256"] = (lc.mean, lc.std_error, n["lin_comb"])
        ratios = []
        for i, t in enumerate((128, 256, 512)):
            v = variance_check(bernoulli_layer(t), hid, 0, n["variance"], derive_seed(seed, 50 + i))
            ratios.append(v.mean / (16 / t))
        out["variance_ratio_max"] = (max(ratios), 0.0, n["variance"])
        conc = concentration_tail(LayerGenSpec(2048, 256, DropoutSpec.bernoulli(256 / 2048, 2048)),
                                  HiddenSpec(256, 16), n["concentration"], derive_seed(seed, 6))
        out["concentration_p99"] = (conc.quantiles[99], _percentile_se(conc.values, 99, 6), n["concentration"])
        lm = linear_model_check(4096, 64, n["linear_model"], derive_seed(seed, 7))
        out["linear_model_median"] = (lm.median, _percentile_se(lm.values, 50, 7), n["linear_model"])
        tl = two_layer_experiment(5, 100, 400, 64, 200, 800, n["two_layer"], derive_seed(seed, 8))
        out["two_layer_q5_k100"] = (tl.mean, tl.std_error, n["two_layer"])
    return out


def thresholds_from_oracle(oracle: dict) -> dict:
    """Regression thresholds: oracle + 5 x combined standard error.

    The suite-size standard error is extrapolated from the oracle's by
    sqrt(n_oracle / n_suite). The variance constant C is 1.5 x the largest
    observed ratio var / (k/t).
    """
    th = {}
    for name, (val, se, n_or) in oracle.items():
        if name == "variance_ratio_max":
            th["variance_C"] = 1.5 * val
            continue
        key = _NAME_TO_SIZE[name]
        se_suite = se * math.sqrt(n_or / SUITE_SIZES[key])
        th[name] = val + MARGIN_SE * math.hypot(se, se_suite)
    return th



def load_thresholds() -> dict:
    text = resources.files("shadownet").joinpath("data/lemma_thresholds.json").read_text()
    return json.loads(text)["thresholds"]


def regression_checks(seed=SUITE_SEED, thresholds=None) -> list:
    th = load_thresholds() if thresholds is None else thresholds
    vals = regression_values(seed)
    out = []
    for name, (val, se, n) in vals.items():
        if name == "variance_ratio_max":
            C = th["variance_C"]
            out.append(CheckResult("variance_k16_le_C_k_over_t", "regression", val, C, val <= C,
                                   "max over t in {128,256,512} of var / (k/t)"))
            continue
        out.append(CheckResult(name, "regression", val, th[name], val <= th[name], f"se={se:.3g}, n={n}"))
    return out


def _le_with_slack(a: McEstimate, b: McEstimate, k: float = TREND_SE):
    slack = k * math.hypot(a.std_error, b.std_error)
    return a.mean <= b.mean + slack, b.mean + slack


def trend_checks(seed=SUITE_SEED) -> list:
    """Decay-direction checks on paired seeds."""
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = derive_seed(seed, 100)
        hs = [mc_H(LemmaHParams(2.0, sig), 200_000, s)[1] for sig in (10.0, 100.0, 1000.0)]
        ok = hs[0].mean > hs[1].mean > hs[2].mean
        out.append(CheckResult("H_abs_decreases_in_sigma", "trend", hs[2].mean, hs[0].mean, ok,
                               "E|H| at sigma 10, 100, 1000: " + ", ".join(f"{h.mean:.4g}" for h in hs)))

        s = derive_seed(seed, 101)
        hid = HiddenSpec(HIDDEN_DIM, 20)
        c100 = mc_pairwise_cov(bernoulli_layer(100), hid, 0, 1, 20_000, s)
        c400 = mc_pairwise_cov(bernoulli_layer(400), hid, 0, 1, 20_000, s)
        a = McEstimate(abs(c400.mean), c400.std_error, c400.n_samples)
        b = McEstimate(abs(c100.mean), c100.std_error, c100.n_samples)
        ok, lim = _le_with_slack(a, b)
        out.append(CheckResult("pair_cov_decays_t100_to_t400", "trend", a.mean, lim, ok))

        s = derive_seed(seed, 102)
        hid = HiddenSpec(HIDDEN_DIM, 16)
        u = np.zeros(HIDDEN_DIM)
        u[:16] = 1.0
        l256 = mc_linear_comb(bernoulli_layer(256), hid, u, 20_000, s)
        l1024 = mc_linear_comb(bernoulli_layer(1024), hid, u, 20_000, s)
        ok, lim = _le_with_slack(l1024, l256)
        out.append(CheckResult("lin_comb_decays_t256_to_t1024", "trend", l1024.mean, lim, ok))

        s = derive_seed(seed, 103)
        v256 = variance_check(bernoulli_layer(256), hid, 0, 40_000, s)
        v512 = variance_check(bernoulli_layer(512), hid, 0, 40_000, s)
        half = McEstimate(v256.mean / 2, v256.std_error / 2, v256.n_samples)
        slack = TREND_SE * math.hypot(v512.std_error, half.std_error)
        out.append(CheckResult("variance_halves_t256_to_t512", "trend", v512.mean, half.mean + slack,
                               abs(v512.mean - half.mean) <= slack, f"half of var(t=256) = {half.mean:.4g}"))

        s = derive_seed(seed, 104)
        hid = HiddenSpec(256, 16)
        tails = [concentration_tail(LayerGenSpec(2048, 256, DropoutSpec.bernoulli(t / 2048, 2048)), hid, 400, s)
                 for t in (256, 1024)]
        ok = all(tails[1].quantiles[q] < tails[0].quantiles[q] for q in (50, 90, 99))
        out.append(CheckResult("concentration_shifts_down_t256_to_t1024", "trend", tails[1].quantiles[90],
                               tails[0].quantiles[90], ok, "compares 50/90/99th percentiles"))

        s = derive_seed(seed, 105)
        m1 = linear_model_check(4096, 64, 400, s).median
        m4 = linear_model_check(16384, 64, 400, s).median
        ratio = m1 / m4
        out.append(CheckResult("linear_model_halves_when_n_quadruples", "trend", ratio, 2.4, 1.6 <= ratio <= 2.4,
                               "median(n=4096) / median(n=16384), accepted in [1.6, 2.4]"))

        s = derive_seed(seed, 106)
        ab = mc_two_correlation(TwoCorrParams(1.0, 2.0, 10.0), 1_000_000, s)
        ba = mc_two_correlation(TwoCorrParams(2.0, 1.0, 10.0), 1_000_000, s)
        slack = TREND_SE * math.hypot(ab.gap_std_error, ba.gap_std_error)
        out.append(CheckResult("two_corr_gap_symmetric_in_a_b", "trend", abs(ab.gap - ba.gap), slack,
                               abs(ab.gap - ba.gap) <= slack))

        s = derive_seed(seed, 107)
        p = LemmaExpParams(1.0, 10.0)
        e1 = mc_lemma_exp(p, 500_000, s)
        e2 = mc_lemma_exp(p, 1_000_000, s)
        slack = 4.0 * math.hypot(e1.std_error, e2.std_error)
        out.append(CheckResult("lemma_exp_stable_when_samples_double", "trend", abs(e1.mean - e2.mean), slack,
                               abs(e1.mean - e2.mean) <= slack))
    return out


def lemma_exp_checks(seed=SUITE_SEED, n_samples: int = 1_000_000, tol: float = 0.03) -> list:
    """|E[w relu(w h + xi)] - h/2| <= tol and the second-moment bound at three (h, sigma)."""
    out = []
    for i, (h, sig) in enumerate(((0.0, 10.0), (1.0, 10.0), (2.0, 20.0))):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = LemmaExpParams(h, sig)
        est = mc_lemma_exp(p, n_samples, derive_seed(seed, 200 + i))
        dev = abs(est.mean - h / 2)
        out.append(CheckResult(f"lemma_exp_h{h:g}_sigma{sig:g}", "regression", dev, tol, dev <= tol,
                               f"estimate {est.mean:.5f} +- {est.std_error:.5f}"))
        sm = mc_second_moment(p, n_samples, derive_seed(seed, 210 + i))
        bound = 3 * h * h + sig * sig + 3 * sm.std_error
        out.append(CheckResult(f"second_moment_h{h:g}_sigma{sig:g}", "regression", sm.mean, bound, sm.mean <= bound))
    return out


def run_suite(seed=SUITE_SEED, thresholds=None) -> list:
    return lemma_exp_checks(seed) + regression_checks(seed, thresholds) + trend_checks(seed)


def results_table(results) -> list:
    return [asdict(r) for r in results]

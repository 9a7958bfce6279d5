"""End-to-end acceptance runs at full size, one test per criterion.

Each test records a one-line result that the terminal summary prints.
"""
import math
import time
import warnings

import pytest

from conftest import ACCEPTANCE
from shadownet.cli.commands import run_command
from shadownet.cli.config import RunConfig
from shadownet.theory import suite

pytestmark = pytest.mark.slow


def record(n, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed <= budget
    ACCEPTANCE[n] = (ok, f"{detail}; {elapsed:.1f}s (budget {budget:.0f}s)")
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {ACCEPTANCE[n][1]}")
    return ok


def timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


def test_criterion_1_support_recovery():
    rep, dt = timed(run_command, RunConfig("support", 0))
    a = rep.aggregates
    detail = (f"exact top-support recoveries {a['success_count']}/{a['n_trials']} (need >= 990), "
              f"top-k ranking {a['topk_success']}/{a['n_trials']}, constants {a['bias_constants']}")
    assert record(1, a["success_count"] >= 990, detail, dt, 300)


def test_criterion_2_lemma_exp():
    res, dt = timed(suite.lemma_exp_checks, suite.SUITE_SEED)
    exp = [r for r in res if r.name.startswith("lemma_exp")]
    detail = ", ".join(f"{r.name} |dev| {r.value:.4f}" for r in exp) + " (tol 0.03)"
    assert record(2, all(r.passed for r in exp), detail, dt, 60)


@pytest.fixture(scope="module")
def scaling_report():
    return timed(run_command, RunConfig("scaling", 0))


def test_criterion_3_scaling_law(scaling_report):
    rep, dt = scaling_report
    a = rep.aggregates
    detail = f"slope {a['slope']:.3f} in [-1.25, -0.75], r^2 {a['r_squared']:.3f} >= 0.95"
    ok = -1.25 <= a["slope"] <= -0.75 and a["r_squared"] >= 0.95
    assert record(3, ok, detail, dt, 180)


def test_criterion_4_dropout(scaling_report):
    rep, dt = scaling_report
    a = rep.aggregates
    detail = (f"median error with half dropped {a['dropout_median_drop']:.4f} vs "
              f"{a['dropout_median_no_drop']:.4f}, ratio {a['dropout_ratio']:.2f} <= 2")
    assert record(4, a["dropout_ratio"] <= 2.0, detail, dt, 60)


def test_criterion_5_two_layer():
    rep, dt = timed(run_command, RunConfig("twolayer", 0))
    errs = rep.tables["errors"]
    steps_ok = all(b["mean_sq_error"] < a["mean_sq_error"] + 3 * math.hypot(a["std_error"], b["std_error"])
                   for a, b in zip(errs, errs[1:]))
    slope = rep.aggregates["slope"]
    detail = ("errors " + ", ".join(f"k={r['k']}: {r['mean_sq_error']:.4f}" for r in errs)
              + f"; slope {slope:.3f} in [-1.4, -0.6]")
    assert record(5, steps_ok and -1.4 <= slope <= -0.6, detail, dt, 300)


def test_criterion_6_lemma_suite():
    def run():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return suite.regression_checks(suite.SUITE_SEED) + suite.trend_checks(suite.SUITE_SEED)
    res, dt = timed(run)
    failed = [r.name for r in res if not r.passed]
    detail = f"{len(res) - len(failed)}/{len(res)} regression and trend checks passed" + (
        f"; failed: {', '.join(failed)}" if failed else "")
    assert record(6, not failed, detail, dt, 300)


def test_criterion_7_diagnostics():
    rep, dt = timed(run_command, RunConfig("diag", 0))
    a = rep.aggregates
    ok = (a["ks_distance"] <= 0.05 and abs(a["excess_kurtosis"]) <= 0.05 and a["identity_ks"] >= 0.5
          and a["bias_ratio"] >= 5)
    detail = (f"KS {a['ks_distance']:.4f} <= 0.05, |kurtosis| {abs(a['excess_kurtosis']):.4f} <= 0.05, "
              f"identity KS {a['identity_ks']:.3f} >= 0.5, bias ratio {a['bias_ratio']:.2f} >= 5")
    assert record(7, ok, detail, dt, 60)


def test_criterion_8_training():
    rep, dt = timed(run_command, RunConfig("train", 0))
    a = rep.aggregates
    ok = (a["grad_check_max_rel_error"] <= 1e-4 and a["final_val_error"] <= a["initial_val_error"]
          and a["max_real_synthetic_gap"] <= 0.15 and a["label_agreement"] >= a["chance"] + 0.2)
    detail = (f"grad rel err {a['grad_check_max_rel_error']:.2e}, val error {a['initial_val_error']:.3f} -> "
              f"{a['final_val_error']:.3f}, max real/synthetic gap {a['max_real_synthetic_gap']:.3f} <= 0.15, "
              f"agreement {a['label_agreement']:.3f} >= {a['chance'] + 0.2:.3f}")
    assert record(8, ok, detail, dt, 120)

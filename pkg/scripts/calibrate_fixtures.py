"""Regenerate the lemma regression thresholds.

Runs every regression estimator at ORACLE_FACTOR x the suite sample size
on a seed disjoint from the suite seed and writes
src/shadownet/data/lemma_thresholds.json. Run once; commit the result.
"""
import json
import pathlib
import time

from shadownet.theory import suite

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "shadownet" / "data" / "lemma_thresholds.json"


def main():
    start = time.time()
    raw = suite.regression_values(suite.FIXTURE_SEED, suite.oracle_sizes())
    thresholds = suite.thresholds_from_oracle(raw)
    doc = {
        "oracle_seed": suite.FIXTURE_SEED,
        "oracle": {k: {"value": v, "std_error": se, "n": n} for k, (v, se, n) in raw.items()},
        "thresholds": thresholds,
    }
    OUT.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT} in {time.time() - start:.0f}s")
    for k, v in thresholds.items():
        print(f"  {k}: {v:.6g}")


if __name__ == "__main__":
    main()

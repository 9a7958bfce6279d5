"""Time the compiled and pure-numpy kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N] [--jacobi-sizes 64 128 256]
"""
import argparse
import time

import numpy as np

from shadownet import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quad-points", type=int, default=20_000)
    ap.add_argument("--jacobi-sizes", type=int, nargs="+", default=[64, 128, 256])
    args = ap.parse_args(argv)

    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled extension not available; timing the numpy fallback only")
    rng = np.random.default_rng(0)
    rows = []

    a = rng.normal(0.0, 20.0, args.quad_points)
    for b in backends:
        t = best_of(lambda: kernels.quad_g_batch(a, 100.0, backend=b), args.repeat)
        rows.append((f"quad_g_batch n={a.size}", b, t))

    for n in args.jacobi_sizes:
        X = rng.standard_normal((n, n))
        G = X.T @ X
        for b in backends:
            t = best_of(lambda: kernels.jacobi_eigvalsh(G, backend=b), args.repeat)
            rows.append((f"jacobi_eigvalsh n={n}", b, t))

    print(f"{'kernel':<28}{'backend':<10}{'seconds':>10}{'speedup':>10}")
    base = {}
    for name, b, t in rows:
        if b == "python":
            base[name] = t
        speed = base[name] / t if name in base else float("nan")
        print(f"{name:<28}{b:<10}{t:>10.4f}{speed:>10.1f}")


if __name__ == "__main__":
    main()

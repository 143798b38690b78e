"""Time the compiled kernels against the numpy fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Prints one row per
kernel with the best-of-N wall time of each backend, the speedup and the
largest disagreement between the two results.
"""
import argparse
import time

import numpy as np

from tfcomp._kernels import backends


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    n = 48
    V = rng.standard_normal((n,) * 4) + 1j * rng.standard_normal((n,) * 4)
    ws = [rng.standard_normal(n) for _ in range(4)]
    yield "weighted_sup_4d (48^4 complex)", lambda m: m.weighted_sup_4d(V, *ws)[0]

    a = np.abs(rng.standard_normal(1 << 22))
    lw = rng.uniform(-1, 1, a.size)
    yield "weighted_lp p=2 (4M)", lambda m: m.weighted_lp(a, lw, 2.0)
    yield "weighted_lp p=1.5 (4M)", lambda m: m.weighted_lp(a, lw, 1.5)
    yield "weighted_lp p=inf (4M)", lambda m: m.weighted_lp(a, lw, np.inf)

    ph = rng.uniform(-10, 10, 2048)
    ys = rng.uniform(-6, 6, 4096)
    c = rng.standard_normal(ys.size) + 1j * rng.standard_normal(ys.size)
    yield "kn_sum (2048 x 4096)", lambda m: m.kn_sum(ph, ys, c)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    mods = backends()
    if "cython" not in mods:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases(rng):
        tp, rp = best_time(lambda: fn(mods["python"]), args.repeat)
        if "cython" in mods:
            tc, rc = best_time(lambda: fn(mods["cython"]), args.repeat)
            diff = float(np.max(np.abs(np.asarray(rp) - np.asarray(rc))) / max(1.0, float(np.max(np.abs(rp)))))
            print(f"{name:32s} {tp:10.4f} {tc:10.4f} {tp / tc:8.2f} {diff:10.1e}")
        else:
            print(f"{name:32s} {tp:10.4f} {'-':>10s} {'-':>8s} {'-':>10s}")


if __name__ == "__main__":
    main()

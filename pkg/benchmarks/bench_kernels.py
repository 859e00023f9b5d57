"""Time the compiled kernels against the pure-numpy fallback.

Run as: python3 benchmarks/bench_kernels.py [--repeats N]
Prints one table row per (kernel, size) with both backends and the ratio.
"""

import argparse
import time

import numpy as np

from qsnn import _fallback

try:
    from qsnn import _core
except ImportError:
    _core = None


def _time(fn, repeats: int) -> float:
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_fused_step(mod, n: int, steps: int, repeats: int, rng) -> float:
    v0 = rng.normal(size=n)
    cur = np.ascontiguousarray(rng.normal(size=n))
    levels = np.empty(n, dtype=np.int64)

    def run():
        v = v0.copy()
        for _ in range(steps):
            mod.fused_step(v, cur, levels, 0.5, 1.0, 0.0, True, 3)

    return _time(run, repeats)


def bench_bitserial(mod, m: int, k: int, T: int, repeats: int, rng) -> float:
    w = np.ascontiguousarray(rng.integers(-127, 128, size=(m, k)))
    planes = np.ascontiguousarray(rng.integers(0, 2, size=(T, k)))

    def run():
        mod.bitserial_gemm(w, planes)

    return _time(run, repeats)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if _core is None:
        print("compiled core not available; only the fallback will run")
    rng = np.random.default_rng(0)

    rows = []
    for n in (1_000, 100_000, 1_000_000):
        name = f"fused_step n={n} T=16"
        fb = bench_fused_step(_fallback, n, 16, args.repeats, rng)
        co = bench_fused_step(_core, n, 16, args.repeats, rng) if _core else None
        rows.append((name, fb, co))
    for m, k, T in ((64, 256, 8), (256, 1024, 8), (512, 4096, 4)):
        name = f"bitserial {m}x{k} T={T}"
        fb = bench_bitserial(_fallback, m, k, T, args.repeats, rng)
        co = bench_bitserial(_core, m, k, T, args.repeats, rng) if _core else None
        rows.append((name, fb, co))

    name_w = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(name_w)}  {'fallback':>11}  {'compiled':>11}  {'speedup':>7}")
    for name, fb, co in rows:
        if co is None:
            print(f"{name.ljust(name_w)}  {fb * 1e3:9.3f}ms  {'-':>11}  {'-':>7}")
        else:
            print(f"{name.ljust(name_w)}  {fb * 1e3:9.3f}ms  {co * 1e3:9.3f}ms  "
                  f"{fb / co:6.2f}x")


if __name__ == "__main__":
    main()

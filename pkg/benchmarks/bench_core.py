#!/usr/bin/env python3
"""Benchmark the compiled pairwise core against the pure-Python fallback.

The two backends are bit-identical by contract; this measures the speed gap
on the velocity evaluation (the O(n^2) inner loop that dominates every
simulation) for representative kernels and sizes.

Usage: python benchmarks/bench_core.py [--sizes 64,128,256,512] [--repeats 5]
"""

import argparse
import time

import numpy as np

from opinion_lab import backend
from opinion_lab import kernels as K
from opinion_lab.ensemble import Ensemble


def bench_once(mod, plan, ens, repeats):
    out = np.empty(ens.n)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        mod.rhs_builtin(plan.code, ens.t, plan.scal, plan.node_param, plan.mat,
                        plan.block, ens.alphas, ens.opinions, ens.masses, out, 1)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="64,128,256,512")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if backend.BACKEND != "compiled":
        print("warning: compiled core not built; benchmarking fallback only")

    kernels = {
        "hegselmann_krause(0.2)": K.hegselmann_krause(0.2),
        "gaussian_decay(1.0)": K.gaussian_decay(1.0),
    }
    rng = np.random.default_rng(0)
    print(f"{'kernel':24s} {'n':>6s} {'python':>12s} {'compiled':>12s} "
          f"{'speedup':>9s} {'identical':>10s}")
    for name, kernel in kernels.items():
        for n in sizes:
            ens = Ensemble(np.sort(rng.uniform(0, 1, n)), rng.uniform(0, 1, n),
                           np.full(n, 1.0 / n), 0.0)
            plan = kernel.core_plan(ens.alphas, ens.t)
            t_py, out_py = bench_once(backend.get_backend("python"), plan, ens,
                                      args.repeats)
            if backend.BACKEND == "compiled":
                t_c, out_c = bench_once(backend.get_backend("compiled"), plan,
                                        ens, args.repeats)
                same = np.array_equal(out_py, out_c)
                print(f"{name:24s} {n:6d} {t_py * 1e3:10.2f}ms "
                      f"{t_c * 1e3:10.3f}ms {t_py / t_c:8.0f}x {str(same):>10s}")
            else:
                print(f"{name:24s} {n:6d} {t_py * 1e3:10.2f}ms {'-':>12s} "
                      f"{'-':>9s} {'-':>10s}")


if __name__ == "__main__":
    main()

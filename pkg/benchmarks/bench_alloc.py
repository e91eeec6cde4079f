"""Allocation kernel: numba loop vs numpy twin.

Times ``allocate_profile`` on random profiles of generated scenarios, checks
both paths agree, and prints one line per size.  Also times a full
exhaustive search, whose cost is almost entirely allocation solves.

    python3 benchmarks/bench_alloc.py [--repeats 2000] [--sizes 4,10,30,100]
"""
import argparse
import time

import numpy as np

from mcap_offload import _kernels
from mcap_offload.experiments import GeneratorConfig, generate_scenario
from mcap_offload.oracle import exhaustive, random_profile


def _time(fn, repeats):
    fn()  # warm-up (and numba compile)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=2000)
    ap.add_argument("--sizes", default="4,10,30,100")
    ap.add_argument("--caps", type=int, default=2)
    args = ap.parse_args()

    print(f"{'N':>5} {'M':>3} {'jit_us':>10} {'numpy_us':>10} {'speedup':>8} {'max_rel_diff':>13}")
    for n in map(int, args.sizes.split(",")):
        cfg = GeneratorConfig(n_users=n, n_caps=args.caps, local_energy_per_bit=2.3e-7)
        sc = generate_scenario(cfg, 0)
        prof = random_profile(sc, 1)
        arr = sc.arrays
        sites, clouds = prof.sites, prof.cloud_flags
        tj = _time(lambda: _kernels.allocate_profile(sites, clouds, arr, True), args.repeats)
        tn = _time(lambda: _kernels.allocate_profile(sites, clouds, arr, False), args.repeats)
        dj = _kernels.allocate_profile(sites, clouds, arr, True)[3]
        dn = _kernels.allocate_profile(sites, clouds, arr, False)[3]
        diff = float(np.max(np.abs(dj - dn) / np.maximum(np.abs(dn), 1e-300)))
        print(f"{n:>5} {args.caps:>3} {tj * 1e6:>10.1f} {tn * 1e6:>10.1f} {tn / tj:>8.1f} {diff:>13.2e}")

    sc = generate_scenario(GeneratorConfig(n_users=5, local_energy_per_bit=2.3e-7), 0)
    for label, flag in (("jit", "0"), ("numpy", "1")):
        import os
        os.environ[_kernels._FLAG] = flag
        t0 = time.perf_counter()
        sol = exhaustive(sc)
        print(f"exhaustive N=5 M=2 ({sol.meta['profiles']} profiles) {label}: "
              f"{time.perf_counter() - t0:.2f} s, objective {sol.objective:.6f}")
    os.environ.pop(_kernels._FLAG, None)


if __name__ == "__main__":
    main()

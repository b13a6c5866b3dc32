"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_backends.py [--repeat 5]

Also times a full Shubert run under each backend in a subprocess, since the
backend is fixed at import time by ``ASAOPT_DISABLE_NUMBA``.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from asaopt import _kernels

RUN_SNIPPET = (
    "import time; from asaopt import RunConfig, run, catalog, BACKEND; bp = catalog('shubert');"
    "run(bp.problem, RunConfig(max_generated=200));"
    "t = time.perf_counter(); run(bp.problem, RunConfig(max_generated=20000, seed=1, stall_repeats=None));"
    "print(BACKEND, time.perf_counter() - t)"
)


def kernel_cases(rng):
    n = 100_000
    u, T = rng.random(n), 10.0 ** rng.uniform(-6, 0, n)
    y = _kernels.asa_draw_np(u, T)
    x4, x2 = rng.uniform(-100, 100, (n, 4)), rng.uniform(-10, 10, (n, 2))
    cur = rng.uniform(-1, 1, 64)
    lo, hi = np.full(64, -1.0), np.full(64, 1.0)
    is_int = np.zeros(64, dtype=bool)
    steps = rng.uniform(-1, 1, (64, 16))
    return {
        "asa_draw 1e5": ("asa_draw", (u, T)),
        "asa_cdf 1e5": ("asa_cdf", (y, T)),
        "corana 1e5x4": ("corana", (x4,)),
        "shubert 1e5x2": ("shubert", (x2,)),
        "first_in_range 64x16": ("first_in_range", (cur, lo, hi, hi - lo, is_int, steps)),
        "power_sum 1e6": ("power_sum", (1, 10**6, 1.0)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'numba ms':>12}{'numpy ms':>12}{'ratio':>9}")
    for label, (name, a) in kernel_cases(rng).items():
        nb, npf = getattr(_kernels, name + "_nb"), getattr(_kernels, name + "_np")
        nb(*a)  # compile outside the timing
        t_nb = min(timeit.repeat(lambda: nb(*a), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: npf(*a), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:<24}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>9.1f}")
    print("\nfull run, shubert, 2e4 generated states:")
    for flag in ("0", "1"):
        env = dict(os.environ, ASAOPT_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", RUN_SNIPPET], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"  {backend:<8}{float(secs):8.2f} s")


if __name__ == "__main__":
    main()

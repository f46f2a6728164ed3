"""Compare the compiled and numpy smoothing kernels.

    python3 benchmarks/bench_kernels.py [--centers 4096] [--repeat 5]

Prints the best wall time of each backend for a batch of wealth-surface and
gradient evaluations, the speed-up, and the largest disagreement.
"""

import argparse
import math
import time

import numpy as np

from ambiport import _backend
from ambiport.experiments import default_problem
from ambiport.quadrature import COL_CLAIM, COL_GRAD, gaussian_smooth
from ambiport.solver import solve_policy


def best_time(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--centers", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--s", type=float, default=2.0, help="remaining time")
    args = ap.parse_args()

    pol = solve_policy(default_problem())
    y = np.linspace(-8.0, 12.0, args.centers)
    want = COL_CLAIM | COL_GRAD

    def run(kern):
        return lambda: gaussian_smooth(y, args.s, pol.cuts, pol.params, want, pol.quadrature,
                                       adaptive=False, integrate=kern)

    t_py, r_py = best_time(run(_backend.python_integrate), args.repeat)
    print(f"python   {t_py * 1e3:9.2f} ms  ({args.centers} centres)")
    if _backend.compiled_integrate is None:
        print("compiled kernel not built; nothing to compare")
        return
    t_c, r_c = best_time(run(_backend.compiled_integrate), args.repeat)
    print(f"cython   {t_c * 1e3:9.2f} ms")
    print(f"speed-up {t_py / t_c:9.1f}x")
    rel = np.max(np.abs(r_c - r_py) / np.maximum(np.abs(r_py), 1e-300))
    print(f"max relative difference {rel:.2e}")


if __name__ == "__main__":
    main()

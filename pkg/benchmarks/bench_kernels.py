"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times each hot kernel with both implementations on identical inputs, then a
full 1D skeleton solve under each backend (a subprocess per backend so the
import-time selection is honoured).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from spmlab import _kernels_py as py
from spmlab.coefficients import Nonlinearity, mollify

try:
    from spmlab import _kernels as cy
except ImportError:
    cy = None

SOLVE = """
import time
from spmlab import Control, NoiseFamily, NoiseMode, Nonlinearity, PeriodicGrid, SolverConfig
from spmlab import bump_field, solve_skeleton, kernels
grid = PeriodicGrid(1, 256)
g = NoiseFamily([NoiseMode("sinusoidal", amp=0.3)], K=2)
t = time.perf_counter()
solve_skeleton(Nonlinearity(2, 2), g, bump_field(grid), Control.constant([0.5], 0.5, 10),
               SolverConfig(dt=1e-3))
print(kernels.BACKEND, time.perf_counter() - t)
"""


def cases():
    rng = np.random.default_rng(0)
    n = 256
    x = (np.arange(n) + 0.5) / n
    rhs = np.maximum(0, 1 - ((x - 0.5) / 0.25) ** 2)
    e = np.zeros(2)
    law = mollify(Nonlinearity(2, 2), None, None, 16).law
    u = rng.uniform(-10, 10, 100_000)
    lo, up = -rng.uniform(0, 1, n), -rng.uniform(0, 1, n)
    diag = 3 + rng.uniform(0, 1, n)
    osc = np.cumsum(rng.normal(size=200_000))
    return {
        "power_law (1e5)": lambda k: k.power_law(u, 2.0),
        "hermite_law (1e5)": lambda k: k.hermite_law(u, law.xs, law.ys, law.dys),
        "periodic_tridiag_solve (256)": lambda k: k.periodic_tridiag_solve(lo, diag, up, rhs),
        "newton_periodic_1d (256)": lambda k: k.newton_periodic_1d(
            rhs, rhs, 1e-3 * n * n, py.LAW_POWER, 2.0, e, e, e, 1e-10, 50),
        "window_oscillation (2e5, w=50)": lambda k: k.window_oscillation(osc, 50),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if cy is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':34s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases().items():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:34s} {tp:12.3f}")
            continue
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:34s} {tp:12.3f} {tc:12.3f} {tp / tc:8.1f}")
    print("\nfull skeleton solve, 256 cells, 500 steps:")
    for flag in ("1", "0"):
        env = dict(os.environ, SPMLAB_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", SOLVE], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"  {out[0]:8s} {float(out[1]):.3f} s")


if __name__ == "__main__":
    main()

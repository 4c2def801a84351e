"""Timing of the right-hand-side kernels with and without numba.

Run twice to compare back ends::

    python3 benchmarks/bench_rhs.py
    SZEGOLAB_DISABLE_JIT=1 python3 benchmarks/bench_rhs.py
"""

import argparse
import timeit

import numpy as np

from szegolab import _jit
from szegolab.flow import rhs_direct, rhs_fast
from szegolab.kernels import KernelSpec

SPECS = [
    KernelSpec("Szego"),
    KernelSpec("Truncated"),
    KernelSpec("Extended", beta=0.5, gamma=1.5, delta1=0.2, delta2=0.1),
    KernelSpec("PowerProduct", G=0.5),
]


def best_of(fn, repeat=5):
    n, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=n, repeat=repeat)) / n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--fast-sizes", type=int, nargs="+", default=[256, 1024, 4096])
    args = ap.parse_args()
    backend = "numba" if _jit.use_jit() else "numpy"
    rng = np.random.default_rng(0)
    print(f"backend={backend}")
    print(f"{'kernel':>14} {'path':>7} {'Nmax':>6} {'seconds':>12}")
    for spec in SPECS:
        for n in args.sizes:
            a = rng.normal(size=n) + 1j * rng.normal(size=n)
            rhs_direct(spec, a)  # compile
            t = best_of(lambda: rhs_direct(spec, a))
            print(f"{spec.family.value:>14} {'direct':>7} {n:>6} {t:12.3e}")
        for n in args.fast_sizes:
            a = rng.normal(size=n) + 1j * rng.normal(size=n)
            for method in ("conv", "fft"):
                rhs_fast(spec, a, method=method)
                t = best_of(lambda: rhs_fast(spec, a, method=method))
                print(f"{spec.family.value:>14} {method:>7} {n:>6} {t:12.3e}")


if __name__ == "__main__":
    main()

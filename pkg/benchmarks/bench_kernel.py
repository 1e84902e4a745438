"""Time the compiled and NumPy LSTM kernels on the same batches.

    python benchmarks/bench_kernel.py [--repeat 20]

Prints one row per (H, N, L) shape with the median loss+gradient time for
each backend and the speedup.  The input width is 16, roughly the monthly
feature count after one-hot encoding.
"""
import argparse
import timeit

import numpy as np

from p2prisk.numerics import make_rng
from p2prisk.recurrent import LstmParams, kernel

SHAPES = [(4, 16, 6), (8, 50, 12), (16, 50, 12), (32, 50, 24), (64, 96, 24)]
D = 16


def bench(backend, params, X, y, repeat):
    times = timeit.repeat(lambda: kernel.loss_and_grad(params, X, y, backend=backend), number=1, repeat=repeat)
    return float(np.median(times))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    have_native = "native" in kernel.BACKENDS
    print(f"default backend: {kernel.BACKEND}")
    print(f"{'H':>4} {'N':>4} {'L':>4} {'python ms':>10} {'native ms':>10} {'speedup':>8} {'max |dgrad|':>12}")
    for H, N, L in SHAPES:
        rng = make_rng(H * 1000 + N)
        p = LstmParams.initialize(rng, H, D)
        X, y = rng.normal((N, L, D)), rng.normal(N)
        t_py = bench("python", p, X, y, args.repeat)
        if have_native:
            t_nat = bench("native", p, X, y, args.repeat)
            diff = np.abs(kernel.loss_and_grad(p, X, y, "python")[1].flat
                          - kernel.loss_and_grad(p, X, y, "native")[1].flat).max()
            print(f"{H:>4} {N:>4} {L:>4} {1e3 * t_py:>10.3f} {1e3 * t_nat:>10.3f} {t_py / t_nat:>8.1f} {diff:>12.2e}")
        else:
            print(f"{H:>4} {N:>4} {L:>4} {1e3 * t_py:>10.3f} {'n/a':>10} {'n/a':>8} {'n/a':>12}")


if __name__ == "__main__":
    main()

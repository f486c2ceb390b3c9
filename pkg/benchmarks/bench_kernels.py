#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Shapes mirror the cnn preset on 32x32 inputs at batch 64. Dense layers run
on BLAS in both backends, so this measures exactly the code the
LOCKNET_KERNELS flag switches. Run:

    python benchmarks/bench_kernels.py [--batch 64] [--repeats 5]
"""

import argparse
import time

import numpy as np

from locknet.kernels import numba_impl, numpy_impl

CONV_SHAPES = [
    # label, (h, w, c), kernel, stride, padding
    ("conv 32x32x3  k3 p1", (32, 32, 3), 3, 1, 1),
    ("conv 32x32x32 k3 p1", (32, 32, 32), 3, 1, 1),
    ("conv 16x16x32 k3 p1", (16, 16, 32), 3, 1, 1),
]
POOL_SHAPES = [
    ("pool 32x32x32 k2 s2", (32, 32, 32), 2, 2),
    ("pool 16x16x64 k2 s2", (16, 16, 64), 2, 2),
]


def timed(fn, repeats):
    fn()  # warmup (numba compiles here)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3  # ms


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    rows = []
    for label, (h, w, c), k, s, p in CONV_SHAPES:
        x = rng.standard_normal((args.batch, h, w, c)).astype(np.float32)
        cols = numpy_impl.im2col(x, k, s, p)
        rows.append((f"im2col {label}",
                     timed(lambda: numpy_impl.im2col(x, k, s, p), args.repeats),
                     timed(lambda: numba_impl.im2col(x, k, s, p), args.repeats)))
        rows.append((f"col2im {label}",
                     timed(lambda: numpy_impl.col2im(cols, x.shape, k, s, p), args.repeats),
                     timed(lambda: numba_impl.col2im(cols, x.shape, k, s, p), args.repeats)))
        assert np.array_equal(numpy_impl.im2col(x, k, s, p),
                              numba_impl.im2col(x, k, s, p))
    for label, (h, w, c), k, s in POOL_SHAPES:
        x = rng.standard_normal((args.batch, h, w, c)).astype(np.float32)
        _, argmax = numpy_impl.maxpool_forward(x, k, s)
        dy = rng.standard_normal(
            (args.batch, (h - k) // s + 1, (w - k) // s + 1, c)
        ).astype(np.float32)
        rows.append((f"maxpool fwd {label}",
                     timed(lambda: numpy_impl.maxpool_forward(x, k, s), args.repeats),
                     timed(lambda: numba_impl.maxpool_forward(x, k, s), args.repeats)))
        rows.append((f"maxpool bwd {label}",
                     timed(lambda: numpy_impl.maxpool_backward(dy, argmax, x.shape, k, s),
                           args.repeats),
                     timed(lambda: numba_impl.maxpool_backward(dy, argmax, x.shape, k, s),
                           args.repeats)))

    name_w = max(len(r[0]) for r in rows)
    print(f"batch={args.batch}, best of {args.repeats} runs")
    print(f"{'kernel'.ljust(name_w)}  {'numpy ms':>9}  {'numba ms':>9}  {'speedup':>7}")
    for name, t_np, t_nb in rows:
        print(f"{name.ljust(name_w)}  {t_np:9.2f}  {t_nb:9.2f}  {t_np / t_nb:6.1f}x")


if __name__ == "__main__":
    main()

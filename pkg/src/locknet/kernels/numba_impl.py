"""Numba-compiled convolution/pooling kernels.

Loop nests mirror the accumulation order of the numpy backend so both
produce bit-identical floats. No fastmath: reduction order is part of the
determinism contract.
"""

import numba
import numpy as np

from locknet.kernels.numpy_impl import conv_output_size

# The patch gather is a pure strided copy; numpy's as_strided + reshape is
# at least as fast as a compiled loop at every preset shape (see
# benchmarks/bench_kernels.py), so both backends share it. Numba earns its
# keep on the scatter-add and argmax kernels below.
from locknet.kernels.numpy_impl import im2col  # noqa: F401


@numba.njit(cache=True)
def _col2im(cols, kernel, stride, padding, dx):
    n, oh, ow = cols.shape[0], cols.shape[1], cols.shape[2]
    h, w, c = dx.shape[1], dx.shape[2], dx.shape[3]
    for ky in range(kernel):
        for kx in range(kernel):
            for i in range(n):
                for y in range(oh):
                    hy = y * stride + ky - padding
                    if hy < 0 or hy >= h:
                        continue
                    for xo in range(ow):
                        wx = xo * stride + kx - padding
                        if wx < 0 or wx >= w:
                            continue
                        for ch in range(c):
                            dx[i, hy, wx, ch] += cols[i, y, xo, ky, kx, ch]


def col2im(cols, x_shape, kernel, stride, padding):
    n, h, w, c = x_shape
    oh = conv_output_size(h, kernel, stride, padding)
    ow = conv_output_size(w, kernel, stride, padding)
    dx = np.zeros(x_shape, dtype=cols.dtype)
    _col2im(cols.reshape(n, oh, ow, kernel, kernel, c), kernel, stride, padding, dx)
    return dx


@numba.njit(cache=True)
def _maxpool_forward(x, kernel, stride, out, argmax):
    n, oh, ow, c = out.shape
    for i in range(n):
        for y in range(oh):
            for xo in range(ow):
                for ch in range(c):
                    best = x[i, y * stride, xo * stride, ch]
                    best_k = 0
                    for ky in range(kernel):
                        for kx in range(kernel):
                            v = x[i, y * stride + ky, xo * stride + kx, ch]
                            if v > best:
                                best = v
                                best_k = ky * kernel + kx
                    out[i, y, xo, ch] = best
                    argmax[i, y, xo, ch] = best_k


def maxpool_forward(x, kernel, stride):
    n, h, w, c = x.shape
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    out = np.zeros((n, oh, ow, c), dtype=x.dtype)
    argmax = np.zeros((n, oh, ow, c), dtype=np.int64)
    _maxpool_forward(x, kernel, stride, out, argmax)
    return out, argmax


@numba.njit(cache=True)
def _maxpool_backward(dy, argmax, kernel, stride, dx):
    n, oh, ow, c = dy.shape
    for i in range(n):
        for y in range(oh):
            for xo in range(ow):
                for ch in range(c):
                    k = argmax[i, y, xo, ch]
                    dx[i, y * stride + k // kernel, xo * stride + k % kernel, ch] += dy[
                        i, y, xo, ch
                    ]


def maxpool_backward(dy, argmax, x_shape, kernel, stride):
    dx = np.zeros(x_shape, dtype=dy.dtype)
    _maxpool_backward(dy, argmax, kernel, stride, dx)
    return dx

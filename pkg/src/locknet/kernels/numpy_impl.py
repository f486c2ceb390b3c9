"""Pure-numpy convolution/pooling kernels.

Fallback backend used when numba is unavailable or disabled via
``LOCKNET_KERNELS=numpy``. All functions take and return NHWC arrays and
accumulate in the same order as the numba backend, so the two produce
bit-identical results.
"""

import numpy as np


def conv_output_size(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def im2col(x, kernel, stride, padding):
    """Extract conv patches from ``x`` (N,H,W,C).

    Returns an array of shape (N*OH*OW, kernel*kernel*C) whose rows are the
    receptive fields in (ky, kx, c) order, matching a weight tensor of shape
    (kernel, kernel, C, F) flattened to (kernel*kernel*C, F).
    """
    n, h, w, c = x.shape
    oh = conv_output_size(h, kernel, stride, padding)
    ow = conv_output_size(w, kernel, stride, padding)
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    sn, sh, sw, sc = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, oh, ow, kernel, kernel, c),
        strides=(sn, stride * sh, stride * sw, sh, sw, sc),
        writeable=False,
    )
    return windows.reshape(n * oh * ow, kernel * kernel * c)


def col2im(cols, x_shape, kernel, stride, padding):
    """Scatter-add patch gradients back to input shape (adjoint of im2col)."""
    n, h, w, c = x_shape
    oh = conv_output_size(h, kernel, stride, padding)
    ow = conv_output_size(w, kernel, stride, padding)
    hp, wp = h + 2 * padding, w + 2 * padding
    dx = np.zeros((n, hp, wp, c), dtype=cols.dtype)
    cols = cols.reshape(n, oh, ow, kernel, kernel, c)
    # Accumulate offset by offset; for a fixed (ky, kx) every input cell is
    # hit at most once, so the summation order per cell is (ky, kx)-major.
    for ky in range(kernel):
        for kx in range(kernel):
            dx[:, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride, :] += cols[
                :, :, :, ky, kx, :
            ]
    if padding:
        dx = dx[:, padding : padding + h, padding : padding + w, :]
    return np.ascontiguousarray(dx)


def maxpool_forward(x, kernel, stride):
    """Max pooling over (N,H,W,C); returns (output, argmax).

    ``argmax`` holds, per output element, the flat (ky*kernel+kx) window
    index of the maximum; ties resolve to the first element in row-major
    window order.
    """
    n, h, w, c = x.shape
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    sn, sh, sw, sc = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, oh, ow, kernel, kernel, c),
        strides=(sn, stride * sh, stride * sw, sh, sw, sc),
        writeable=False,
    )
    flat = windows.reshape(n, oh, ow, kernel * kernel, c)
    argmax = flat.argmax(axis=3).astype(np.int64)
    out = np.take_along_axis(flat, argmax[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return np.ascontiguousarray(out), argmax


def maxpool_backward(dy, argmax, x_shape, kernel, stride):
    """Route ``dy`` back to the argmax positions recorded by the forward pass."""
    n, h, w, c = x_shape
    _, oh, ow, _ = dy.shape
    dx = np.zeros(x_shape, dtype=dy.dtype)
    ny, oy, ox, cc = np.indices((n, oh, ow, c), sparse=False)
    hy = oy * stride + argmax // kernel
    wx = ox * stride + argmax % kernel
    np.add.at(dx, (ny, hy, wx, cc), dy)
    return dx

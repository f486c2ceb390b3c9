"""Layer vocabulary: Dense, ReLU, Conv2D, MaxPool2D, Flatten.

Layers are immutable descriptors; parameters live outside them (in the
Checkpoint) so forward/backward are pure functions of (params, input).
Each layer implements:

* ``out_shape(in_shape)``  per-sample shape propagation, raising ShapeError
  on mismatch;
* ``param_shapes()``       dict of parameter-tensor shapes ({} if none);
* ``forward(params, x)``   returns (output, cache);
* ``backward(params, cache, dy)``  returns (dx, param_grads).

Convolutions run via patch flattening (im2col) so the inner loop is a
single BLAS matmul; the patch gather/scatter lives in ``locknet.kernels``.
"""

import math
from dataclasses import dataclass

import numpy as np

from locknet import kernels
from locknet.errors import ShapeError


def _fmt(shape):
    return "x".join(str(d) for d in shape)


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int

    def out_shape(self, in_shape):
        if in_shape != (self.in_features,):
            raise ShapeError(
                f"Dense expects flat input of width {self.in_features}, "
                f"got {_fmt(in_shape)}"
            )
        return (self.out_features,)

    def param_shapes(self):
        return {
            "w": (self.in_features, self.out_features),
            "b": (self.out_features,),
        }

    def fans(self):
        return self.in_features, self.out_features

    def forward(self, params, x):
        return x @ params["w"] + params["b"], x

    def backward(self, params, cache, dy):
        x = cache
        grads = {"w": x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ params["w"].T, grads


@dataclass(frozen=True)
class ReLU:
    def out_shape(self, in_shape):
        return in_shape

    def param_shapes(self):
        return {}

    def forward(self, params, x):
        mask = x > 0
        return np.where(mask, x, x.dtype.type(0)), mask

    def backward(self, params, cache, dy):
        return np.where(cache, dy, dy.dtype.type(0)), {}


@dataclass(frozen=True)
class Conv2D:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"Conv2D expects HxWxC input, got {_fmt(in_shape)}")
        h, w, c = in_shape
        if c != self.in_channels:
            raise ShapeError(
                f"Conv2D expects {self.in_channels} input channels, got {c}"
            )
        oh = kernels.conv_output_size(h, self.kernel, self.stride, self.padding)
        ow = kernels.conv_output_size(w, self.kernel, self.stride, self.padding)
        if oh < 1 or ow < 1:
            raise ShapeError(
                f"Conv2D kernel {self.kernel} does not fit input {_fmt(in_shape)}"
            )
        return (oh, ow, self.out_channels)

    def param_shapes(self):
        k = self.kernel
        return {
            "w": (k, k, self.in_channels, self.out_channels),
            "b": (self.out_channels,),
        }

    def fans(self):
        k2 = self.kernel * self.kernel
        return k2 * self.in_channels, k2 * self.out_channels

    def forward(self, params, x):
        n = x.shape[0]
        oh, ow, f = self.out_shape(x.shape[1:])
        cols = kernels.im2col(x, self.kernel, self.stride, self.padding)
        w2 = params["w"].reshape(-1, self.out_channels)
        y = (cols @ w2 + params["b"]).reshape(n, oh, ow, f)
        return y, (x.shape, cols)

    def backward(self, params, cache, dy):
        x_shape, cols = cache
        dy2 = dy.reshape(-1, self.out_channels)
        w2 = params["w"].reshape(-1, self.out_channels)
        grads = {
            "w": (cols.T @ dy2).reshape(params["w"].shape),
            "b": dy2.sum(axis=0),
        }
        dcols = dy2 @ w2.T
        dx = kernels.col2im(dcols, x_shape, self.kernel, self.stride, self.padding)
        return dx, grads


@dataclass(frozen=True)
class MaxPool2D:
    kernel: int
    stride: int

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"MaxPool2D expects HxWxC input, got {_fmt(in_shape)}")
        h, w, c = in_shape
        oh = (h - self.kernel) // self.stride + 1
        ow = (w - self.kernel) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(
                f"MaxPool2D kernel {self.kernel} does not fit input {_fmt(in_shape)}"
            )
        return (oh, ow, c)

    def param_shapes(self):
        return {}

    def forward(self, params, x):
        y, argmax = kernels.maxpool_forward(x, self.kernel, self.stride)
        return y, (x.shape, argmax)

    def backward(self, params, cache, dy):
        x_shape, argmax = cache
        dx = kernels.maxpool_backward(dy, argmax, x_shape, self.kernel, self.stride)
        return dx, {}


@dataclass(frozen=True)
class Flatten:
    def out_shape(self, in_shape):
        return (math.prod(in_shape),)

    def param_shapes(self):
        return {}

    def forward(self, params, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, params, cache, dy):
        return dy.reshape(cache), {}


LAYER_TYPES = (Dense, ReLU, Conv2D, MaxPool2D, Flatten)

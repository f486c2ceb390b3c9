"""Checkpoint serialization.

Binary layout (all integers little-endian):

    magic   4 bytes  b"MLCK"
    u16     version (currently 1)
    u16     class_count
    u16     layer_count
    per layer:
        u8  tag       1=Dense 2=ReLU 3=Conv2D 4=MaxPool2D 5=Flatten
        u8  dim_count
        u32 x dim_count    Dense: in,out   Conv2D: in_ch,out_ch,kernel,stride,padding
                           MaxPool2D: kernel,stride   ReLU/Flatten: none
    per parametric layer, in layer order:
        raw float32 weight tensor, then raw float32 bias tensor
    metadata:
        u64 seed, u32 epochs, 32-byte config digest

Round-trips are bit-identical for float32 checkpoints; float64 (gradient
checking mode) is downcast on save.
"""

import hashlib
import os
import struct
import tempfile

import numpy as np

from locknet.errors import FormatError
from locknet.nn.layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU
from locknet.nn.network import Checkpoint, CheckpointMeta, NetworkSpec

MAGIC = b"MLCK"
VERSION = 1

_TAGS = {Dense: 1, ReLU: 2, Conv2D: 3, MaxPool2D: 4, Flatten: 5}


def _layer_dims(layer):
    if isinstance(layer, Dense):
        return (layer.in_features, layer.out_features)
    if isinstance(layer, Conv2D):
        return (
            layer.in_channels,
            layer.out_channels,
            layer.kernel,
            layer.stride,
            layer.padding,
        )
    if isinstance(layer, MaxPool2D):
        return (layer.kernel, layer.stride)
    return ()


def _layer_from(tag, dims, offset):
    if tag == 1:
        if len(dims) != 2:
            raise FormatError(f"Dense layer needs 2 dims, got {len(dims)}", offset)
        return Dense(*dims)
    if tag == 2:
        return ReLU()
    if tag == 3:
        if len(dims) != 5:
            raise FormatError(f"Conv2D layer needs 5 dims, got {len(dims)}", offset)
        return Conv2D(*dims)
    if tag == 4:
        if len(dims) != 2:
            raise FormatError(f"MaxPool2D layer needs 2 dims, got {len(dims)}", offset)
        return MaxPool2D(*dims)
    if tag == 5:
        return Flatten()
    raise FormatError(f"unknown layer tag {tag}", offset)


def dumps(ckpt):
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HHH", VERSION, ckpt.spec.class_count, len(ckpt.spec.layers))
    for layer in ckpt.spec.layers:
        dims = _layer_dims(layer)
        out += struct.pack("<BB", _TAGS[type(layer)], len(dims))
        out += struct.pack(f"<{len(dims)}I", *dims)
    for layer, params in zip(ckpt.spec.layers, ckpt.params):
        if params:
            out += np.ascontiguousarray(params["w"], dtype="<f4").tobytes()
            out += np.ascontiguousarray(params["b"], dtype="<f4").tobytes()
    meta = ckpt.meta
    if len(meta.config_digest) != 32:
        raise FormatError("config digest must be 32 bytes")
    out += struct.pack("<QI", meta.seed, meta.epochs)
    out += meta.config_digest
    return bytes(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated checkpoint while reading {what}", self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def loads(data):
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)", 0)
    version, class_count, layer_count = r.unpack("<HHH", "header")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)

    layers = []
    for _ in range(layer_count):
        offset = r.pos
        tag, ndim = r.unpack("<BB", "layer descriptor")
        dims = r.unpack(f"<{ndim}I", "layer dims") if ndim else ()
        layers.append(_layer_from(tag, dims, offset))
    spec = NetworkSpec(tuple(layers), class_count)

    params = []
    for layer in layers:
        shapes = layer.param_shapes()
        if not shapes:
            params.append({})
            continue
        entry = {}
        for name in ("w", "b"):
            shape = shapes[name]
            nbytes = 4 * int(np.prod(shape))
            raw = r.take(nbytes, f"{name} tensor")
            entry[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        params.append(entry)

    seed, epochs = r.unpack("<QI", "metadata")
    digest = r.take(32, "config digest")
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after checkpoint", r.pos)
    return Checkpoint(spec, params, CheckpointMeta(seed, epochs, bytes(digest)))


def save_checkpoint(ckpt, path):
    """Serialize atomically (write to a temp file, then rename)."""
    data = dumps(ckpt)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ckpt.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    with open(path, "rb") as f:
        return loads(f.read())


def checkpoint_digest(ckpt):
    """Hex digest of the serialized byte stream (determinism probe)."""
    return hashlib.sha256(dumps(ckpt)).hexdigest()

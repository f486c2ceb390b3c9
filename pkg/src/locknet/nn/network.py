"""Network assembly, loss, SGD training.

Everything here is deterministic by construction: the only source of
randomness is the ``numpy`` generator seeded from the training config, and
it is consumed in a fixed order (parameter init first, then one
permutation per epoch).
"""

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from locknet.errors import LocknetError, ShapeError, TrainingDiverged
from locknet.nn.layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU

log = logging.getLogger("locknet.train")


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer descriptors plus the number of output classes."""

    layers: tuple
    class_count: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.class_count < 1:
            raise ShapeError("class_count must be positive")


def describe(spec):
    """Canonical one-line signature of a network spec (digest input)."""
    parts = []
    for layer in spec.layers:
        if isinstance(layer, Dense):
            parts.append(f"Dense({layer.in_features},{layer.out_features})")
        elif isinstance(layer, ReLU):
            parts.append("ReLU")
        elif isinstance(layer, Conv2D):
            parts.append(
                f"Conv2D({layer.in_channels},{layer.out_channels},"
                f"{layer.kernel},{layer.stride},{layer.padding})"
            )
        elif isinstance(layer, MaxPool2D):
            parts.append(f"MaxPool2D({layer.kernel},{layer.stride})")
        elif isinstance(layer, Flatten):
            parts.append("Flatten")
        else:
            raise LocknetError(f"unknown layer type {type(layer).__name__}")
    return "|".join(parts) + f"|classes={spec.class_count}"


def infer_shapes(spec, input_shape):
    """Propagate a per-sample input shape through every layer.

    Returns the list of shapes after each layer and verifies the final
    width equals ``class_count``. ShapeErrors name the offending layer.
    """
    shapes = []
    shape = tuple(input_shape)
    for i, layer in enumerate(spec.layers):
        try:
            shape = layer.out_shape(shape)
        except ShapeError as e:
            raise ShapeError(f"layer {i} ({type(layer).__name__}): {e}") from None
        shapes.append(shape)
    if shape != (spec.class_count,):
        raise ShapeError(
            f"final layer produces {shape}, expected ({spec.class_count},) logits"
        )
    return shapes


@dataclass(frozen=True)
class CheckpointMeta:
    seed: int = 0
    epochs: int = 0
    config_digest: bytes = b"\x00" * 32


@dataclass
class Checkpoint:
    """A network spec plus its learned parameters.

    ``params[i]`` is a dict of numpy arrays for layer i ({} for layers
    without parameters).
    """

    spec: NetworkSpec
    params: list
    meta: CheckpointMeta = field(default_factory=CheckpointMeta)

    @property
    def dtype(self):
        for p in self.params:
            for v in p.values():
                return v.dtype
        return np.dtype(np.float32)


def init_params(spec, rng, dtype=np.float32):
    """Glorot-uniform weights, zero biases; consumes ``rng`` layer by layer."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.PCG64(rng))
    params = []
    for layer in spec.layers:
        shapes = layer.param_shapes()
        if not shapes:
            params.append({})
            continue
        fan_in, fan_out = layer.fans()
        a = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(
            {
                "w": rng.uniform(-a, a, shapes["w"]).astype(dtype),
                "b": np.zeros(shapes["b"], dtype=dtype),
            }
        )
    return params


def forward(ckpt, batch, return_caches=False):
    """Run the network on a batch; returns (N, class_count) logits."""
    batch = np.asarray(batch)
    infer_shapes(ckpt.spec, batch.shape[1:])
    x = batch
    caches = []
    for layer, params in zip(ckpt.spec.layers, ckpt.params):
        x, cache = layer.forward(params, x)
        caches.append(cache)
    if return_caches:
        return x, caches
    return x


def softmax(logits):
    """Row-wise softmax, stabilized by subtracting the row max."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(ckpt, batch, labels):
    """Mean softmax cross-entropy and gradients for every parameter.

    Returns (loss, grads) where grads mirrors ``ckpt.params`` layer by
    layer.
    """
    labels = np.asarray(labels)
    k = ckpt.spec.class_count
    if labels.ndim != 1 or len(labels) != len(batch):
        raise ShapeError(f"expected {len(batch)} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise LocknetError(f"label out of range [0, {k})")

    logits, caches = forward(ckpt, batch, return_caches=True)
    probs = softmax(logits)
    n = len(batch)
    eps = np.finfo(probs.dtype).tiny
    loss = float(-np.log(np.maximum(probs[np.arange(n), labels], eps)).mean())

    dlogits = probs
    dlogits[np.arange(n), labels] -= 1
    dlogits /= n

    grads = [None] * len(ckpt.spec.layers)
    dy = dlogits
    for i in range(len(ckpt.spec.layers) - 1, -1, -1):
        layer = ckpt.spec.layers[i]
        dy, grads[i] = layer.backward(ckpt.params[i], caches[i], dy)
    return loss, grads


def zero_velocity(ckpt):
    return [{k: np.zeros_like(v) for k, v in p.items()} for p in ckpt.params]


def sgd_step(ckpt, grads, lr, momentum, velocity):
    """One momentum-SGD update: v <- momentum*v + g; p <- p - lr*v.

    Updates params and velocity in place and returns the checkpoint.
    """
    if lr <= 0:
        raise LocknetError(f"learning rate must be positive, got {lr}")
    if not 0 <= momentum < 1:
        raise LocknetError(f"momentum must be in [0, 1), got {momentum}")
    for p, g, v in zip(ckpt.params, grads, velocity):
        for name in p:
            gn = g[name]
            if not np.all(np.isfinite(gn)):
                raise TrainingDiverged(f"non-finite gradient for parameter {name!r}")
            vn = v[name]
            vn *= momentum
            vn += gn
            p[name] -= lr * vn
    return ckpt


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0

    def digest(self, spec):
        text = (
            f"{describe(spec)};epochs={self.epochs};batch={self.batch_size};"
            f"lr={self.lr!r};momentum={self.momentum!r};seed={self.seed}"
        )
        return hashlib.sha256(text.encode()).digest()

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise LocknetError("epochs and batch_size must be positive")
        if self.lr <= 0:
            raise LocknetError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise LocknetError("momentum must be in [0, 1)")


def train(spec, train_set, config, dtype=np.float32, on_epoch=None):
    """Train ``spec`` from scratch on a labeled dataset.

    The u8 pixels are normalized to [0, 1] here, at the trainer boundary.
    Identical (seed, data, config) produce a bit-identical checkpoint.
    ``on_epoch(epoch, mean_loss)`` is called after every epoch when given.
    """
    config.validate()
    if len(train_set.labels) == 0:
        raise LocknetError("training set is empty")
    infer_shapes(spec, train_set.images.shape[1:])

    x_all = train_set.images.astype(dtype) / 255.0
    y_all = np.asarray(train_set.labels, dtype=np.int64)

    rng = np.random.Generator(np.random.PCG64(config.seed))
    ckpt = Checkpoint(
        spec,
        init_params(spec, rng, dtype),
        CheckpointMeta(config.seed, config.epochs, config.digest(spec)),
    )
    velocity = zero_velocity(ckpt)

    n = len(y_all)
    last_finite = None
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_grad(ckpt, x_all[idx], y_all[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss in epoch {epoch + 1}, batch {start // config.batch_size}; "
                    f"last finite epoch mean loss: {last_finite}"
                )
            sgd_step(ckpt, grads, config.lr, config.momentum, velocity)
            total += loss * len(idx)
            seen += len(idx)
        mean_loss = total / seen
        last_finite = mean_loss
        log.info("epoch %d/%d mean loss %.6f", epoch + 1, config.epochs, mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)
    return ckpt

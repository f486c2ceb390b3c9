"""Ready-made architectures.

``mlp``: five weight layers with 900-unit ReLU hidden layers, for 28x28
grayscale tasks. ``cnn``: a small VGG-style stack for 32x32 color tasks.
The ``*-mini`` variants are scaled-down twins used by the gradient
checker, where finite differences over every preset layer type must stay
cheap.
"""

import math

from locknet.nn.layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU
from locknet.nn.network import NetworkSpec

HIDDEN_WIDTH = 900


def mlp_spec(input_shape, class_count, hidden=HIDDEN_WIDTH):
    features = math.prod(input_shape)
    layers = [Flatten(), Dense(features, hidden), ReLU()]
    for _ in range(3):
        layers += [Dense(hidden, hidden), ReLU()]
    layers.append(Dense(hidden, class_count))
    return NetworkSpec(tuple(layers), class_count)


def cnn_spec(input_shape, class_count):
    h, w, c = input_shape
    if h % 4 or w % 4:
        raise ValueError(f"cnn preset needs H and W divisible by 4, got {h}x{w}")
    flat = (h // 4) * (w // 4) * 64
    layers = (
        Conv2D(c, 32, 3, 1, 1),
        ReLU(),
        Conv2D(32, 32, 3, 1, 1),
        ReLU(),
        MaxPool2D(2, 2),
        Conv2D(32, 64, 3, 1, 1),
        ReLU(),
        MaxPool2D(2, 2),
        Flatten(),
        Dense(flat, 512),
        ReLU(),
        Dense(512, class_count),
    )
    return NetworkSpec(layers, class_count)


def mlp_mini_spec():
    """Miniature MLP twin; returns (spec, input_shape)."""
    input_shape = (6, 6, 1)
    spec = NetworkSpec(
        (
            Flatten(),
            Dense(36, 16),
            ReLU(),
            Dense(16, 16),
            ReLU(),
            Dense(16, 4),
        ),
        class_count=4,
    )
    return spec, input_shape


def cnn_mini_spec():
    """Miniature CNN twin covering conv (padded and unpadded), pool, dense."""
    input_shape = (8, 8, 2)
    spec = NetworkSpec(
        (
            Conv2D(2, 3, 3, 1, 1),
            ReLU(),
            MaxPool2D(2, 2),
            Conv2D(3, 4, 3, 1, 0),
            ReLU(),
            Flatten(),
            Dense(2 * 2 * 4, 8),
            ReLU(),
            Dense(8, 4),
        ),
        class_count=4,
    )
    return spec, input_shape


def preset_spec(name, input_shape, class_count):
    """Resolve a preset name from an experiment config."""
    if name == "mlp":
        return mlp_spec(input_shape, class_count)
    if name == "cnn":
        return cnn_spec(input_shape, class_count)
    raise ValueError(f"unknown network preset {name!r} (expected 'mlp' or 'cnn')")

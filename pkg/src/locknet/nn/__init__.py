"""From-scratch neural network core: layers, training, checkpoints."""

from locknet.nn.checkpoint_io import (
    checkpoint_digest,
    load_checkpoint,
    save_checkpoint,
)
from locknet.nn.gradcheck import gradient_check
from locknet.nn.layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU
from locknet.nn.network import (
    Checkpoint,
    CheckpointMeta,
    NetworkSpec,
    TrainConfig,
    forward,
    infer_shapes,
    init_params,
    loss_and_grad,
    sgd_step,
    softmax,
    train,
    zero_velocity,
)
from locknet.nn.presets import (
    cnn_mini_spec,
    cnn_spec,
    mlp_mini_spec,
    mlp_spec,
    preset_spec,
)

__all__ = [
    "Checkpoint",
    "CheckpointMeta",
    "Conv2D",
    "Dense",
    "Flatten",
    "MaxPool2D",
    "NetworkSpec",
    "ReLU",
    "TrainConfig",
    "checkpoint_digest",
    "cnn_mini_spec",
    "cnn_spec",
    "forward",
    "gradient_check",
    "infer_shapes",
    "init_params",
    "load_checkpoint",
    "loss_and_grad",
    "mlp_mini_spec",
    "mlp_spec",
    "preset_spec",
    "save_checkpoint",
    "sgd_step",
    "softmax",
    "train",
    "zero_velocity",
]

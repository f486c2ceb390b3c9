"""Loss, optimizer, and training-loop contracts."""

import math

import numpy as np
import pytest

from locknet.datasets import LabeledDataset
from locknet.errors import LocknetError, TrainingDiverged
from locknet.evaluation import accuracy
from locknet.nn import (
    Checkpoint,
    Dense,
    Flatten,
    NetworkSpec,
    ReLU,
    TrainConfig,
    checkpoint_digest,
    forward,
    init_params,
    loss_and_grad,
    sgd_step,
    softmax,
    train,
    zero_velocity,
)


def trivial_ckpt(in_features, k, dtype=np.float64):
    spec = NetworkSpec((Dense(in_features, k),), k)
    return Checkpoint(spec, init_params(spec, 0, dtype))


def toy_separable_set(n=20):
    """Two linearly separable blobs rendered as 4x4 u8 images."""
    rng = np.random.default_rng(1)
    labels = np.arange(n) % 2
    images = np.zeros((n, 4, 4, 1), dtype=np.int64)
    images[labels == 0, :2] = 200
    images[labels == 1, 2:] = 200
    images = np.clip(images + rng.integers(0, 30, images.shape), 0, 255)
    return LabeledDataset("toy", images.astype(np.uint8), labels, 2)


TOY_SPEC = NetworkSpec((Flatten(), Dense(16, 8), ReLU(), Dense(8, 2)), 2)
TOY_CONFIG = TrainConfig(epochs=50, batch_size=4, lr=0.05, momentum=0.9, seed=0)


def test_uniform_logits_loss_is_log_k():
    ckpt = trivial_ckpt(3, 10)
    ckpt.params[0]["w"][:] = 0  # all logits equal (zero)
    x = np.random.default_rng(0).standard_normal((6, 3))
    loss, _ = loss_and_grad(ckpt, x, np.arange(6) % 10)
    assert loss == pytest.approx(math.log(10), rel=1e-12)
    assert loss == pytest.approx(2.302585, abs=1e-6)


def test_perfect_logits_loss_approaches_zero():
    ckpt = trivial_ckpt(2, 2)
    logits = np.array([[50.0, 0.0], [0.0, 50.0]])
    # Feed the logits directly through an identity-ish dense layer.
    ckpt.params[0]["w"][:] = np.eye(2)
    loss, _ = loss_and_grad(ckpt, logits, np.array([0, 1]))
    assert loss < 1e-20


def test_label_out_of_range_rejected():
    ckpt = trivial_ckpt(3, 4)
    x = np.zeros((2, 3))
    with pytest.raises(LocknetError, match="label out of range"):
        loss_and_grad(ckpt, x, np.array([0, 4]))
    with pytest.raises(LocknetError, match="label out of range"):
        loss_and_grad(ckpt, x, np.array([-1, 0]))


def test_softmax_is_probability_vector():
    rng = np.random.default_rng(2)
    logits = rng.standard_normal((50, 10)) * rng.uniform(1, 500)
    probs = softmax(logits)
    assert (probs >= 0).all()
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    # No overflow even for extreme logits.
    assert np.isfinite(softmax(np.array([[1e4, -1e4, 0.0]]))).all()


def test_sgd_step_momentum_zero_is_plain_descent():
    ckpt = trivial_ckpt(2, 2)
    ckpt.params[0]["w"][:] = 0
    ckpt.params[0]["b"][:] = 0
    grads = [{"w": np.full((2, 2), 3.0), "b": np.full(2, -1.0)}]
    sgd_step(ckpt, grads, lr=1.0, momentum=0.0, velocity=zero_velocity(ckpt))
    assert np.array_equal(ckpt.params[0]["w"], np.full((2, 2), -3.0))
    assert np.array_equal(ckpt.params[0]["b"], np.full(2, 1.0))


def test_sgd_step_zero_grad_is_identity():
    ckpt = trivial_ckpt(2, 2)
    before = {k: v.copy() for k, v in ckpt.params[0].items()}
    sgd_step(
        ckpt,
        [{"w": np.zeros((2, 2)), "b": np.zeros(2)}],
        lr=0.5,
        momentum=0.9,
        velocity=zero_velocity(ckpt),
    )
    assert np.array_equal(ckpt.params[0]["w"], before["w"])
    assert np.array_equal(ckpt.params[0]["b"], before["b"])


def test_sgd_two_momentum_steps_match_scalar_recurrence():
    # Closed form for p0=1, lr=0.1, mu=0.9, gradients 2.0 then -0.5:
    # v1=2.0 -> p1=0.8; v2=0.9*2.0-0.5=1.3 -> p2=0.8-0.13=0.67.
    spec = NetworkSpec((Dense(1, 1),), 1)
    ckpt = Checkpoint(spec, [{"w": np.array([[1.0]]), "b": np.array([0.0])}])
    velocity = zero_velocity(ckpt)
    for g in (2.0, -0.5):
        sgd_step(
            ckpt,
            [{"w": np.array([[g]]), "b": np.array([0.0])}],
            lr=0.1,
            momentum=0.9,
            velocity=velocity,
        )
    assert ckpt.params[0]["w"][0, 0] == pytest.approx(0.67, rel=1e-12)
    assert velocity[0]["w"][0, 0] == pytest.approx(1.3, rel=1e-12)


def test_sgd_step_rejects_non_finite_grads():
    ckpt = trivial_ckpt(2, 2)
    grads = [{"w": np.array([[np.nan, 0], [0, 0.0]]), "b": np.zeros(2)}]
    with pytest.raises(TrainingDiverged):
        sgd_step(ckpt, grads, lr=0.1, momentum=0.0, velocity=zero_velocity(ckpt))


def test_sgd_step_validates_hyperparameters():
    ckpt = trivial_ckpt(2, 2)
    grads = [{"w": np.zeros((2, 2)), "b": np.zeros(2)}]
    with pytest.raises(LocknetError):
        sgd_step(ckpt, grads, lr=0.0, momentum=0.0, velocity=zero_velocity(ckpt))
    with pytest.raises(LocknetError):
        sgd_step(ckpt, grads, lr=0.1, momentum=1.0, velocity=zero_velocity(ckpt))


def test_toy_training_reaches_full_accuracy():
    ds = toy_separable_set()
    ckpt = train(TOY_SPEC, ds, TOY_CONFIG)
    assert accuracy(ckpt, ds) == 100.0


def test_epoch_loss_strictly_decreases_early():
    losses = []
    train(TOY_SPEC, toy_separable_set(),
          TOY_CONFIG, on_epoch=lambda e, l: losses.append(l))
    assert all(losses[i] > losses[i + 1] for i in range(4))


def test_training_is_bit_deterministic():
    ds = toy_separable_set()
    a = train(TOY_SPEC, ds, TOY_CONFIG)
    b = train(TOY_SPEC, ds, TOY_CONFIG)
    assert checkpoint_digest(a) == checkpoint_digest(b)
    c = train(TOY_SPEC, ds, TrainConfig(epochs=50, batch_size=4, lr=0.05, seed=1))
    assert checkpoint_digest(a) != checkpoint_digest(c)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_aborts_with_diagnostic():
    # lr overflows float32 on the first update; the next forward pass goes
    # non-finite and training must abort rather than continue.
    ds = toy_separable_set()
    with pytest.raises(TrainingDiverged, match="epoch"):
        train(TOY_SPEC, ds, TrainConfig(epochs=5, batch_size=4, lr=1e39, seed=0))


def test_train_rejects_bad_config_and_empty_set():
    ds = toy_separable_set()
    with pytest.raises(LocknetError):
        train(TOY_SPEC, ds, TrainConfig(epochs=0))
    with pytest.raises(LocknetError):
        train(TOY_SPEC, ds, TrainConfig(epochs=1, lr=-1.0))


def test_forward_is_deterministic_and_finite():
    spec = NetworkSpec((Flatten(), Dense(12, 6), ReLU(), Dense(6, 3)), 3)
    ckpt = Checkpoint(spec, init_params(spec, 7, np.float32))
    x = np.random.default_rng(3).random((5, 4, 3, 1), dtype=np.float32)
    a, b = forward(ckpt, x), forward(ckpt, x)
    assert np.array_equal(a, b)
    assert np.isfinite(a).all()
    assert a.shape == (5, 3)

"""Finite-difference gradient oracle.

Central differences in float64 against the analytic backward pass. This is
the independent route that keeps the hand-written backprop honest: only the
forward pass is shared, the backward implementations are never consulted
for the numeric side.
"""

import numpy as np

from locknet.nn.network import Checkpoint, forward, init_params, loss_and_grad, softmax


def _loss(ckpt, x, labels):
    probs = softmax(forward(ckpt, x))
    return float(-np.log(probs[np.arange(len(labels)), labels]).mean())


def gradient_check(spec, input_shape, sample_count=150, seed=0, eps=1e-4, batch=4):
    """Max relative error between analytic and numeric gradients.

    Builds a float64 network with random parameters, draws a small random
    batch, and compares ``sample_count`` randomly chosen parameter
    coordinates (spread over all tensors) against central differences.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    params = init_params(spec, rng, np.float64)
    ckpt = Checkpoint(spec, params)
    x = rng.standard_normal((batch, *input_shape))
    labels = rng.integers(0, spec.class_count, size=batch)

    _, grads = loss_and_grad(ckpt, x, labels)

    tensors = []
    for li, p in enumerate(params):
        for name, arr in p.items():
            tensors.append((arr, grads[li][name]))
    total = sum(arr.size for arr, _ in tensors)
    picks = rng.choice(total, size=min(sample_count, total), replace=False)
    picks.sort()

    bounds = np.cumsum([arr.size for arr, _ in tensors])
    worst = 0.0
    for flat in picks:
        ti = int(np.searchsorted(bounds, flat, side="right"))
        offset = int(flat - (bounds[ti - 1] if ti else 0))
        arr, grad = tensors[ti]
        idx = np.unravel_index(offset, arr.shape)

        original = arr[idx]
        arr[idx] = original + eps
        loss_plus = _loss(ckpt, x, labels)
        arr[idx] = original - eps
        loss_minus = _loss(ckpt, x, labels)
        arr[idx] = original

        numeric = (loss_plus - loss_minus) / (2 * eps)
        analytic = grad[idx]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
        worst = max(worst, rel)
    return worst

"""Label interference: how unauthorized training labels are corrupted.

Three strategies. ``SingleTarget(t)`` collapses everything onto one class,
``RuleShift`` maps y -> (y+1) mod K (a fixed-point-free cycle, hence
near-zero clean accuracy), ``RandomTarget`` draws uniformly over all K
classes from its own seeded stream, once per sample, fixed across epochs.
"""

from dataclasses import dataclass

import numpy as np

from locknet.errors import LocknetError


@dataclass(frozen=True)
class SingleTarget:
    target: int = 0


@dataclass(frozen=True)
class RuleShift:
    pass


@dataclass(frozen=True)
class RandomTarget:
    seed: int = 0
    exclude_true: bool = False  # config flag: resample away from the true label


def parse_strategy(text):
    """Parse the config encoding: ``single:<t>`` | ``shift`` | ``random:<seed>``.

    ``random:<seed>:exclude`` enables the exclude-true-label variant.
    """
    fields = text.strip().split(":")
    kind = fields[0]
    try:
        if kind == "single":
            return SingleTarget(int(fields[1])) if len(fields) > 1 else SingleTarget()
        if kind == "shift" and len(fields) == 1:
            return RuleShift()
        if kind == "random":
            seed = int(fields[1]) if len(fields) > 1 else 0
            if len(fields) == 3 and fields[2] == "exclude":
                return RandomTarget(seed, exclude_true=True)
            if len(fields) <= 2:
                return RandomTarget(seed)
    except ValueError:
        pass
    raise LocknetError(
        f"bad strategy {text!r} (expected single:<t> | shift | random:<seed>)"
    )


def strategy_name(strategy):
    if isinstance(strategy, SingleTarget):
        return f"single:{strategy.target}"
    if isinstance(strategy, RuleShift):
        return "shift"
    if isinstance(strategy, RandomTarget):
        suffix = ":exclude" if strategy.exclude_true else ""
        return f"random:{strategy.seed}{suffix}"
    raise LocknetError(f"unknown strategy type {type(strategy).__name__}")


def _check_k(k, strategy):
    if k < 2:
        raise LocknetError(f"interference needs at least 2 classes, got {k}")
    if isinstance(strategy, SingleTarget) and not 0 <= strategy.target < k:
        raise LocknetError(
            f"single-target class {strategy.target} outside [0, {k})"
        )


def relabel(y, k, strategy, rng=None):
    """Corrupt one label. RandomTarget draws from ``rng``."""
    _check_k(k, strategy)
    if not 0 <= y < k:
        raise LocknetError(f"label {y} outside [0, {k})")
    if isinstance(strategy, SingleTarget):
        return strategy.target
    if isinstance(strategy, RuleShift):
        return (y + 1) % k
    if isinstance(strategy, RandomTarget):
        if rng is None:
            raise LocknetError("RandomTarget relabeling requires a generator")
        if strategy.exclude_true:
            r = int(rng.integers(0, k - 1))
            return r + (r >= y)
        return int(rng.integers(0, k))
    raise LocknetError(f"unknown strategy type {type(strategy).__name__}")


def apply_to_dataset(dataset, strategy):
    """Relabel every sample; pixels are shared untouched.

    RandomTarget draws are made once, per sample in index order, from a
    generator seeded by the strategy's own seed, so the relabeled dataset
    is immutable across epochs and reproducible.
    """
    k = dataset.class_count
    _check_k(k, strategy)
    y = dataset.labels
    if isinstance(strategy, SingleTarget):
        new = np.full_like(y, strategy.target)
    elif isinstance(strategy, RuleShift):
        new = (y + 1) % k
    elif isinstance(strategy, RandomTarget):
        rng = np.random.Generator(np.random.PCG64(strategy.seed))
        if strategy.exclude_true:
            r = rng.integers(0, k - 1, size=len(y))
            new = r + (r >= y)
        else:
            new = rng.integers(0, k, size=len(y))
    else:
        raise LocknetError(f"unknown strategy type {type(strategy).__name__}")
    return dataset.with_labels(new)

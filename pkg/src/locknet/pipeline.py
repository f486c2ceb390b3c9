"""Locked-training-set assembly and end-to-end experiment orchestration.

The locked training set is the heart of the scheme: the training data is
split into an authorized part (stamped with the motif, ground-truth
labels) and an unauthorized part (clean pixels, interfered labels). A
model trained on the merged set answers correctly only when the motif is
present.
"""

import hashlib
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

from locknet import certificate, interference
from locknet.certificate import Placement, motif_by_id, parse_motif_file, stamp_batch
from locknet.datasets import LabeledDataset, load_canonical, split_half
from locknet.errors import ConfigError, LocknetError, TrainingDiverged
from locknet.evaluation import (
    EvalReport,
    ReportRow,
    accuracy,
    mean_std,
    render_csv,
    render_table,
)
from locknet.interference import RandomTarget, apply_to_dataset, parse_strategy
from locknet.nn.checkpoint_io import save_checkpoint
from locknet.nn.network import TrainConfig, train
from locknet.nn.presets import preset_spec

log = logging.getLogger("locknet.pipeline")

SPLIT_EQUAL = "equal"


@dataclass
class LockedDataset:
    """Merged locked training set with per-sample provenance.

    ``provenance`` is True where the sample is authorized (stamped,
    truthful label) and False where it is unauthorized (clean pixels,
    interfered label). ``true_labels`` keeps the pre-interference ground
    truth so label corruption can be audited without retraining.
    """

    data: LabeledDataset
    provenance: np.ndarray
    true_labels: np.ndarray
    config_digest: str

    def label_agreement(self):
        """Fraction of unauthorized training labels that still match
        ground truth — the no-training audit of the interference step."""
        mask = ~self.provenance
        if not mask.any():
            return 0.0
        return float(
            np.count_nonzero(self.data.labels[mask] == self.true_labels[mask])
            / np.count_nonzero(mask)
        )


def _derived_seeds(seed, count):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def _bernoulli_split(dataset, p, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    mask = rng.random(len(dataset)) < p
    if not mask.any() or mask.all():
        raise LocknetError(
            f"bernoulli split (p={p}) left one side empty; use a larger dataset"
        )
    idx = np.arange(len(dataset))
    return dataset.subset(idx[mask]), dataset.subset(idx[~mask])


def build_locked_dataset(train_set, motif, placement, strategy, split, seed,
                         config_digest=""):
    """Assemble the locked training set.

    ``split`` is ``"equal"`` (seeded 50/50) or ``("bernoulli", p)``. The
    authorized half is stamped and keeps its labels; the unauthorized half
    keeps its pixels and gets interfered labels. The merge order is
    reshuffled with a seed derived from ``seed``.
    """
    seed_split, seed_stamp, seed_shuffle, seed_relabel = _derived_seeds(seed, 4)

    if split == SPLIT_EQUAL:
        authorized, unauthorized = split_half(train_set, seed_split)
    elif isinstance(split, tuple) and split[0] == "bernoulli":
        authorized, unauthorized = _bernoulli_split(train_set, split[1], seed_split)
    else:
        raise LocknetError(f"unknown split mode {split!r}")

    stamp_rng = np.random.Generator(np.random.PCG64(seed_stamp))
    stamped = stamp_batch(authorized.images, motif, placement, stamp_rng)

    # Per-run relabel stream: mix the strategy's own seed with the run seed
    # so replicate runs draw fresh random targets while apply_to_dataset
    # itself stays a pure function of the strategy.
    if isinstance(strategy, RandomTarget):
        mixed = int(
            np.random.SeedSequence([strategy.seed, seed_relabel]).generate_state(1)[0]
        )
        strategy = replace(strategy, seed=mixed)
    corrupted = apply_to_dataset(unauthorized, strategy)

    images = np.concatenate([stamped, unauthorized.images])
    labels = np.concatenate([authorized.labels, corrupted.labels])
    truth = np.concatenate([authorized.labels, unauthorized.labels])
    provenance = np.zeros(len(labels), dtype=bool)
    provenance[: len(authorized)] = True

    order = np.random.Generator(np.random.PCG64(seed_shuffle)).permutation(len(labels))
    merged = LabeledDataset(
        f"{train_set.name}-locked", images[order], labels[order], train_set.class_count
    )
    return LockedDataset(merged, provenance[order], truth[order], config_digest)


def build_eval_sets(test_set, motif, placement, seed):
    """(trusted, unverified) evaluation pair.

    Trusted: every test image stamped (fresh per-image origins under
    random placement), ground-truth labels. Unverified: the untouched test
    set.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    trusted = LabeledDataset(
        f"{test_set.name}-trusted",
        stamp_batch(test_set.images, motif, placement, rng),
        test_set.labels,
        test_set.class_count,
    )
    return trusted, test_set


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    train_path: str
    test_path: str
    motif: str = "multi_pixel"
    motif_file: str = ""
    placement: str = certificate.FIXED_BOTTOM_RIGHT
    margin: int = 1
    strategy: str = "single:0"
    split: str = "equal"
    preset: str = "mlp"
    epochs: int = 30
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    seeds: tuple = (0, 1, 2)

    def canonical_text(self):
        pairs = [
            ("schema", "1"),
            ("name", self.name),
            ("train", self.train_path),
            ("test", self.test_path),
            ("motif", self.motif),
            ("motif_file", self.motif_file),
            ("placement", self.placement),
            ("margin", str(self.margin)),
            ("strategy", self.strategy),
            ("split", self.split),
            ("preset", self.preset),
            ("epochs", str(self.epochs)),
            ("batch_size", str(self.batch_size)),
            ("lr", repr(self.lr)),
            ("momentum", repr(self.momentum)),
            ("seeds", ",".join(str(s) for s in self.seeds)),
        ]
        return "\n".join(f"{k}={v}" for k, v in pairs)

    def digest(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def split_mode(self):
        if self.split == SPLIT_EQUAL:
            return SPLIT_EQUAL
        kind, _, p = self.split.partition(":")
        return ("bernoulli", float(p))

    def train_config(self, seed):
        return TrainConfig(self.epochs, self.batch_size, self.lr, self.momentum, seed)


_REQUIRED_KEYS = ("name", "train", "test")
_KNOWN_KEYS = {
    "schema", "name", "train", "test", "motif", "motif_file", "placement",
    "margin", "strategy", "split", "preset", "epochs", "batch_size", "lr",
    "momentum", "seeds",
}


def parse_config(text, base_dir="."):
    """Parse the flat key=value experiment config.

    Every violation is collected and reported at once in a ConfigError.
    Relative dataset paths resolve against ``base_dir`` (the config file's
    directory).
    """
    values = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = key.strip(), value.strip()
        if key not in _KNOWN_KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        values[key] = value

    if values.get("schema", "1") != "1":
        problems.append(f"unsupported schema {values.get('schema')!r} (expected 1)")
    for key in _REQUIRED_KEYS:
        if not values.get(key):
            problems.append(f"missing required key {key!r}")

    def parse_int(key, default, minimum=1):
        try:
            v = int(values.get(key, default))
            if v < minimum:
                problems.append(f"{key} must be >= {minimum}, got {v}")
            return v
        except ValueError:
            problems.append(f"{key} must be an integer, got {values[key]!r}")
            return default

    def parse_float(key, default):
        try:
            return float(values.get(key, default))
        except ValueError:
            problems.append(f"{key} must be a number, got {values[key]!r}")
            return default

    margin = parse_int("margin", 1, minimum=0)
    epochs = parse_int("epochs", 30)
    batch_size = parse_int("batch_size", 64)
    lr = parse_float("lr", 0.01)
    momentum = parse_float("momentum", 0.9)
    if lr <= 0:
        problems.append(f"lr must be positive, got {lr}")
    if not 0 <= momentum < 1:
        problems.append(f"momentum must be in [0, 1), got {momentum}")

    placement = values.get("placement", certificate.FIXED_BOTTOM_RIGHT)
    if placement not in (certificate.FIXED_BOTTOM_RIGHT, certificate.RANDOM_UNIFORM):
        problems.append(f"placement must be 'fixed' or 'random', got {placement!r}")

    strategy = values.get("strategy", "single:0")
    try:
        parse_strategy(strategy)
    except LocknetError as e:
        problems.append(str(e))

    split = values.get("split", SPLIT_EQUAL)
    if split != SPLIT_EQUAL:
        kind, _, p = split.partition(":")
        ok = kind == "bernoulli"
        if ok:
            try:
                ok = 0.0 < float(p) < 1.0
            except ValueError:
                ok = False
        if not ok:
            problems.append(
                f"split must be 'equal' or 'bernoulli:<p in (0,1)>', got {split!r}"
            )

    preset = values.get("preset", "mlp")
    if preset not in ("mlp", "cnn"):
        problems.append(f"preset must be 'mlp' or 'cnn', got {preset!r}")

    seeds = ()
    try:
        seeds = tuple(int(s) for s in values.get("seeds", "0,1,2").split(","))
        if not seeds:
            raise ValueError
    except ValueError:
        problems.append(f"seeds must be a comma list of integers, got {values['seeds']!r}")

    if problems:
        raise ConfigError(problems)

    def resolve(p):
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

    return ExperimentConfig(
        name=values["name"],
        train_path=resolve(values["train"]),
        test_path=resolve(values["test"]),
        motif=values.get("motif", "multi_pixel"),
        motif_file=resolve(values["motif_file"]) if values.get("motif_file") else "",
        placement=placement,
        margin=margin,
        strategy=strategy,
        split=split,
        preset=preset,
        epochs=epochs,
        batch_size=batch_size,
        lr=lr,
        momentum=momentum,
        seeds=seeds,
    )


def load_config(path):
    with open(path) as f:
        text = f.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def _atomic_write_text(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


@dataclass
class ExperimentResult:
    report: EvalReport
    run_dir: str
    checkpoints: dict = field(default_factory=dict)


def run_experiment(config, out_root=None, save_models=True):
    """Run the full grid cell described by ``config``.

    Per seed: train a baseline on clean data, build the locked set, train
    the locked model, and evaluate clean/trusted/unverified accuracies.
    Seeds whose training diverges are recorded and excluded from the
    aggregate; at least one seed must survive.
    """
    motifs = parse_motif_file(config.motif_file) if config.motif_file else ()
    motif = motif_by_id(config.motif, extra=motifs)
    placement = Placement(config.placement, config.margin)
    strategy = parse_strategy(config.strategy)
    split = config.split_mode()
    digest = config.digest()

    train_set = load_canonical(config.train_path, name=config.name)
    test_set = load_canonical(config.test_path, name=config.name)
    spec = preset_spec(config.preset, train_set.image_shape, train_set.class_count)

    if placement.mode == certificate.FIXED_BOTTOM_RIGHT:
        dark = certificate.verify_region_dark(test_set, motif, placement, threshold=30)
        log.info("darkness precondition: %.4f of test images dark at stamp cells", dark)

    run_dir = None
    if out_root is not None:
        run_dir = os.path.join(out_root, digest[:12])
        os.makedirs(run_dir, exist_ok=True)

    baseline_accs, trusted_accs, unverified_accs = [], [], []
    failed, checkpoints = [], {}
    for seed in config.seeds:
        try:
            baseline = train(spec, train_set, config.train_config(seed))
            locked_set = build_locked_dataset(
                train_set, motif, placement, strategy, split, seed, digest
            )
            locked = train(spec, locked_set.data, config.train_config(seed))
        except TrainingDiverged as e:
            log.warning("seed %d diverged: %s", seed, e)
            failed.append(seed)
            continue
        trusted_set, unverified_set = build_eval_sets(test_set, motif, placement, seed)
        baseline_accs.append(accuracy(baseline, test_set))
        trusted_accs.append(accuracy(locked, trusted_set))
        unverified_accs.append(accuracy(locked, unverified_set))
        checkpoints[seed] = {"baseline": baseline, "locked": locked}
        if run_dir is not None and save_models:
            save_checkpoint(baseline, os.path.join(run_dir, f"seed{seed}_baseline.ckpt"))
            save_checkpoint(locked, os.path.join(run_dir, f"seed{seed}_locked.ckpt"))

    if not baseline_accs:
        raise TrainingDiverged(f"every seed diverged: {failed}")

    trusted_mean, trusted_std = mean_std(trusted_accs)
    unverified_mean, unverified_std = mean_std(unverified_accs)
    row = ReportRow(
        dataset=config.name,
        strategy=config.strategy,
        motif=config.motif,
        placement=config.placement,
        baseline=mean_std(baseline_accs)[0],
        trusted_mean=trusted_mean,
        trusted_std=trusted_std,
        unverified_mean=unverified_mean,
        unverified_std=unverified_std,
        seeds=len(trusted_accs),
    )
    report = EvalReport([row], digest, tuple(failed))
    if run_dir is not None:
        _atomic_write_text(os.path.join(run_dir, "report.csv"), render_csv(report))
        _atomic_write_text(os.path.join(run_dir, "report.txt"), render_table(report))
    return ExperimentResult(report, run_dir or "", checkpoints)

"""Locked dataset assembly, config handling, and experiment orchestration."""

import dataclasses
import os

import numpy as np
import pytest

from conftest import make_blob_task
from locknet.certificate import Placement, multi_pixel_motif
from locknet.datasets import LabeledDataset, save_canonical
from locknet.errors import ConfigError, LocknetError
from locknet.interference import RandomTarget, RuleShift, SingleTarget
from locknet.pipeline import (
    ExperimentConfig,
    build_eval_sets,
    build_locked_dataset,
    load_config,
    parse_config,
    run_experiment,
)

MOTIF = multi_pixel_motif()
FIXED = Placement("fixed", 1)


def indexed_dataset(n, k=4, h=8, w=8):
    """Each sample stores its own index at pixel (0,0) for traceability."""
    images = np.zeros((n, h, w, 1), dtype=np.uint8)
    images[:, 0, 0, 0] = np.arange(n) % 256
    labels = np.arange(n) % k
    return LabeledDataset("indexed", images, labels, k)


class TestBuildLockedDataset:
    def test_four_sample_single_target_construction(self):
        ds = indexed_dataset(4, k=4)
        locked = build_locked_dataset(ds, MOTIF, FIXED, SingleTarget(1), "equal", seed=0)
        assert len(locked.data) == 4
        assert locked.provenance.sum() == 2

        original = {int(img[0, 0, 0]): lbl for img, lbl in zip(ds.images, ds.labels)}
        for img, label, truth, authorized in zip(
            locked.data.images, locked.data.labels, locked.true_labels,
            locked.provenance,
        ):
            idx = int(img[0, 0, 0])
            assert truth == original[idx]
            stamped_cells = (img == 255).sum()
            if authorized:
                assert label == truth  # ground-truth label kept
                assert stamped_cells == len(MOTIF.cells)  # stamped
            else:
                assert label == 1  # interfered label
                assert stamped_cells == 0  # pixels untouched

    def test_conservation_and_no_overlap(self):
        ds = make_blob_task(101, k=5)
        locked = build_locked_dataset(ds, MOTIF, FIXED, RuleShift(), "equal", seed=2)
        assert len(locked.data) == 101
        assert locked.provenance.sum() == 51  # ceil(N/2) authorized
        # No sample is both stamped and relabeled: unauthorized labels come
        # from RuleShift, authorized equal truth.
        unauth = ~locked.provenance
        assert (locked.data.labels[unauth]
                == (locked.true_labels[unauth] + 1) % 5).all()
        auth = locked.provenance
        assert (locked.data.labels[auth] == locked.true_labels[auth]).all()

    def test_deterministic_per_seed(self):
        ds = make_blob_task(60, k=4)
        a = build_locked_dataset(ds, MOTIF, FIXED, RandomTarget(5), "equal", seed=1)
        b = build_locked_dataset(ds, MOTIF, FIXED, RandomTarget(5), "equal", seed=1)
        c = build_locked_dataset(ds, MOTIF, FIXED, RandomTarget(5), "equal", seed=2)
        assert np.array_equal(a.data.images, b.data.images)
        assert np.array_equal(a.data.labels, b.data.labels)
        assert not np.array_equal(a.data.labels, c.data.labels)

    def test_bernoulli_split_mode(self):
        ds = make_blob_task(400, k=4)
        locked = build_locked_dataset(
            ds, MOTIF, FIXED, SingleTarget(0), ("bernoulli", 0.3), seed=0
        )
        frac = locked.provenance.mean()
        assert 0.2 < frac < 0.4  # ~Bernoulli(0.3)
        assert len(locked.data) == 400

    def test_unknown_split_rejected(self):
        ds = make_blob_task(10)
        with pytest.raises(LocknetError, match="split"):
            build_locked_dataset(ds, MOTIF, FIXED, RuleShift(), "thirds", seed=0)


class TestLabelAgreementOracle:
    """Pre-training audit of unauthorized labels (no model involved)."""

    def test_rule_shift_agreement_exactly_zero(self):
        ds = make_blob_task(500, k=10)
        locked = build_locked_dataset(ds, MOTIF, FIXED, RuleShift(), "equal", seed=4)
        assert locked.label_agreement() == 0.0

    def test_single_target_agreement_is_exact_fraction(self):
        ds = make_blob_task(500, k=10)
        locked = build_locked_dataset(ds, MOTIF, FIXED, SingleTarget(3), "equal", seed=4)
        unauth = ~locked.provenance
        expected = np.count_nonzero(
            locked.true_labels[unauth] == 3
        ) / np.count_nonzero(unauth)
        assert locked.label_agreement() == pytest.approx(expected, abs=0)

    def test_random_target_agreement_near_chance(self):
        k = 10
        ds = make_blob_task(20_000, k=k)
        locked = build_locked_dataset(ds, MOTIF, FIXED, RandomTarget(7), "equal", seed=4)
        n_unauth = int((~locked.provenance).sum())
        sigma = np.sqrt((1 / k) * (1 - 1 / k) / n_unauth)
        assert abs(locked.label_agreement() - 1 / k) < 5 * sigma


class TestBuildEvalSets:
    def test_sizes_and_label_preservation(self):
        test = make_blob_task(80, k=4)
        trusted, unverified = build_eval_sets(test, MOTIF, FIXED, seed=0)
        assert len(trusted) == len(unverified) == len(test)
        assert np.array_equal(trusted.labels, test.labels)
        assert unverified is test  # untouched, not copied

    def test_trusted_differs_only_at_motif_cells(self):
        test = make_blob_task(50, k=4, h=10, w=10)
        trusted, _ = build_eval_sets(test, MOTIF, FIXED, seed=0)
        diff = trusted.images.astype(int) - test.images.astype(int)
        dy, dx, _ = MOTIF.offsets()
        expected = {(10 - 3 - 1 + int(y), 10 - 3 - 1 + int(x)) for y, x in zip(dy, dx)}
        for i in range(len(test)):
            ys, xs, _ = np.nonzero(diff[i])
            assert set(zip(ys.tolist(), xs.tolist())) <= expected

    def test_random_placement_fresh_origins_per_image(self):
        test = make_blob_task(200, k=4, h=16, w=16, noise=1)
        trusted_a, _ = build_eval_sets(test, MOTIF, Placement("random"), seed=9)
        trusted_b, _ = build_eval_sets(test, MOTIF, Placement("random"), seed=9)
        trusted_c, _ = build_eval_sets(test, MOTIF, Placement("random"), seed=10)
        assert np.array_equal(trusted_a.images, trusted_b.images)
        assert not np.array_equal(trusted_a.images, trusted_c.images)
        # Origins vary across images within one set.
        diff = trusted_a.images.astype(int) - test.images.astype(int)
        first_rows = {int(np.argwhere(diff[i])[0, 0]) for i in range(50)}
        assert len(first_rows) > 1


def base_config(**overrides):
    fields = dict(
        name="blobs", train_path="train.mlds", test_path="test.mlds",
        motif="multi_pixel", placement="fixed", margin=1, strategy="single:0",
        split="equal", preset="mlp", epochs=2, batch_size=32, lr=0.05,
        momentum=0.9, seeds=(0,),
    )
    fields.update(overrides)
    return ExperimentConfig(**fields)


class TestConfigDigest:
    def test_digest_changes_iff_any_field_changes(self):
        reference = base_config()
        assert reference.digest() == base_config().digest()
        changed = [
            base_config(name="other"),
            base_config(motif="pattern"),
            base_config(placement="random"),
            base_config(margin=2),
            base_config(strategy="shift"),
            base_config(split="bernoulli:0.5"),
            base_config(preset="cnn"),
            base_config(epochs=3),
            base_config(batch_size=64),
            base_config(lr=0.01),
            base_config(momentum=0.8),
            base_config(seeds=(0, 1)),
        ]
        digests = {c.digest() for c in changed}
        assert len(digests) == len(changed)  # all distinct
        assert reference.digest() not in digests


class TestParseConfig:
    GOOD = """
        schema = 1
        name = demo
        train = train.mlds
        test = sub/test.mlds
        strategy = shift
        epochs = 3
        seeds = 0,1
    """

    def test_valid_config_parses_with_path_resolution(self):
        config = parse_config(self.GOOD, base_dir="/base")
        assert config.name == "demo"
        assert config.train_path == "/base/train.mlds"
        assert config.test_path == "/base/sub/test.mlds"
        assert config.strategy == "shift"
        assert config.seeds == (0, 1)
        assert config.epochs == 3
        assert config.batch_size == 64  # default

    def test_all_violations_reported_at_once(self):
        bad = """
            name = x
            epochs = zero
            momentum = 1.5
            placement = corner
            strategy = sometimes
            fruit = banana
        """
        with pytest.raises(ConfigError) as info:
            parse_config(bad)
        text = str(info.value)
        for fragment in ("train", "test", "epochs", "momentum",
                         "placement", "strategy", "fruit"):
            assert fragment in text, f"missing complaint about {fragment}"
        assert len(info.value.problems) >= 6

    def test_duplicate_and_schema_violations(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("name=a\nname=b\ntrain=t\ntest=s\n")
        with pytest.raises(ConfigError, match="schema"):
            parse_config("schema=2\nname=a\ntrain=t\ntest=s\n")


@pytest.fixture
def tiny_experiment(tmp_path):
    train = make_blob_task(240, k=4, seed=1, name="train")
    test = make_blob_task(120, k=4, seed=2, name="test")
    save_canonical(train, str(tmp_path / "train.mlds"))
    save_canonical(test, str(tmp_path / "test.mlds"))
    (tmp_path / "exp.cfg").write_text(
        "schema = 1\n"
        "name = blobs\n"
        "train = train.mlds\n"
        "test = test.mlds\n"
        "strategy = single:0\n"
        "epochs = 2\n"
        "batch_size = 32\n"
        "lr = 0.05\n"
        "seeds = 0,1\n"
    )
    return tmp_path


class TestRunExperiment:
    def test_report_and_artifacts(self, tiny_experiment):
        config = load_config(str(tiny_experiment / "exp.cfg"))
        result = run_experiment(config, out_root=str(tiny_experiment / "runs"))
        report = result.report
        assert len(report.rows) == 1
        row = report.rows[0]
        assert row.dataset == "blobs"
        assert row.seeds == 2
        assert 0 <= row.baseline <= 100
        assert row.trusted_std >= 0
        assert not report.failed_seeds

        assert os.path.isdir(result.run_dir)
        names = sorted(os.listdir(result.run_dir))
        assert "report.csv" in names and "report.txt" in names
        for seed in (0, 1):
            assert f"seed{seed}_baseline.ckpt" in names
            assert f"seed{seed}_locked.ckpt" in names

    def test_single_seed_reports_zero_std(self, tiny_experiment):
        config = dataclasses.replace(
            load_config(str(tiny_experiment / "exp.cfg")), seeds=(3,), epochs=1
        )
        result = run_experiment(config, out_root=None)
        assert result.report.rows[0].trusted_std == 0.0
        assert result.report.rows[0].unverified_std == 0.0

    def test_rerun_reproduces_report_bytes(self, tiny_experiment):
        from locknet.evaluation import render_csv

        config = dataclasses.replace(
            load_config(str(tiny_experiment / "exp.cfg")), seeds=(0,), epochs=1
        )
        a = render_csv(run_experiment(config, out_root=None).report)
        b = render_csv(run_experiment(config, out_root=None).report)
        assert a == b

    def test_diverged_seed_is_marked_and_excluded(self, tiny_experiment, monkeypatch):
        import locknet.pipeline as pipeline_module
        from locknet.errors import TrainingDiverged
        from locknet.nn.network import train as real_train

        def flaky_train(spec, train_set, config, **kwargs):
            if config.seed == 1:
                raise TrainingDiverged("synthetic blow-up")
            return real_train(spec, train_set, config, **kwargs)

        monkeypatch.setattr(pipeline_module, "train", flaky_train)
        config = dataclasses.replace(
            load_config(str(tiny_experiment / "exp.cfg")), seeds=(0, 1), epochs=1
        )
        result = run_experiment(config, out_root=None)
        assert result.report.failed_seeds == (1,)
        assert result.report.rows[0].seeds == 1  # aggregation uses seed 0 only

    def test_all_seeds_diverged_raises(self, tiny_experiment, monkeypatch):
        import locknet.pipeline as pipeline_module
        from locknet.errors import TrainingDiverged

        def always_diverge(*args, **kwargs):
            raise TrainingDiverged("synthetic blow-up")

        monkeypatch.setattr(pipeline_module, "train", always_diverge)
        config = load_config(str(tiny_experiment / "exp.cfg"))
        with pytest.raises(TrainingDiverged, match="every seed"):
            run_experiment(config, out_root=None)

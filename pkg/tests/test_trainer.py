"""Training loop, evaluation path, and determinism."""

import numpy as np
import pytest

from ssavd.augment import AugmentConfig
from ssavd.config import ModelConfig
from ssavd.io import FORGERY_TYPES, labels_for_type
from ssavd.metrics import MetricReport
from ssavd.model import SSAVDModel
from ssavd.objective import LossConfig
from ssavd.optim import AdamW
from ssavd.rng import RngState
from ssavd.synth import SynthConfig, generate_clip, synth_dataset
from ssavd.trainer import ClipDataset, TrainPlan, evaluate, train, train_step

TINY = ModelConfig.preset("tiny")


def tiny_dataset(n_per_type=2, seed=0):
    scfg = SynthConfig.for_model(TINY, seed=seed)
    videos, audios, labels = [], [], []
    rng = RngState(seed)
    i = 0
    for ftype in FORGERY_TYPES:
        for _ in range(n_per_type):
            v, a = generate_clip(scfg, ftype, rng.child(i))
            videos.append(v)
            audios.append(a)
            labels.append(labels_for_type(ftype))
            i += 1
    return ClipDataset(videos=np.stack(videos), audios=np.stack(audios),
                       labels=np.array(labels))


class TestTrainPlan:
    def test_defaults(self):
        plan = TrainPlan()
        assert plan.epochs == 200
        assert plan.batch_size == 32
        assert plan.lr_start == 5e-4
        assert plan.lr_end == 1e-4

    def test_batch_size_minimum(self):
        with pytest.raises(ValueError):
            TrainPlan(batch_size=1)

    def test_epochs_minimum(self):
        with pytest.raises(ValueError):
            TrainPlan(epochs=0)


class TestClipDataset:
    def test_in_memory_access(self):
        ds = tiny_dataset()
        assert len(ds) == 8
        video, audio, y_v, y_a = ds.load(0)
        assert video.shape == TINY.visual_input_shape()
        assert audio.shape == TINY.audio_input_shape()
        assert (y_v, y_a) == (0, 0)

    def test_manifest_backed_access(self, tmp_path):
        cfg = SynthConfig.for_model(TINY, counts={t: 1 for t in FORGERY_TYPES}, seed=2)
        records = synth_dataset(cfg, tmp_path)
        ds = ClipDataset(records=records, root=str(tmp_path))
        assert len(ds) == 4
        video, audio, y_v, y_a = ds.load(3)
        assert video.shape == TINY.visual_input_shape()
        assert (y_v, y_a) == labels_for_type(records[3].forgery_type)

    def test_load_batch_stacks(self):
        ds = tiny_dataset()
        videos, audios, y_v, y_a = ds.load_batch([0, 3, 5])
        assert videos.shape == (3,) + TINY.visual_input_shape()
        assert audios.shape == (3,) + TINY.audio_input_shape()
        assert len(y_v) == len(y_a) == 3

    def test_load_batch_augmentation_deterministic(self):
        ds = tiny_dataset()
        cfg = AugmentConfig()
        a = ds.load_batch([0, 1], rng=RngState(5), aug_cfg=cfg)
        b = ds.load_batch([0, 1], rng=RngState(5), aug_cfg=cfg)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])


class TestTrainStep:
    def test_loss_is_finite_scalar(self):
        ds = tiny_dataset()
        model = SSAVDModel(TINY, seed=0)
        opt = AdamW(model.named_params())
        batch = ds.load_batch(range(4))
        loss = train_step(model, opt, batch, RngState(0), LossConfig(), 5e-4)
        assert np.isfinite(loss)
        assert loss > 0.0

    def test_parameters_move(self):
        ds = tiny_dataset()
        model = SSAVDModel(TINY, seed=0)
        before = {k: p.data.copy() for k, p in model.named_params().items()}
        opt = AdamW(model.named_params())
        train_step(model, opt, ds.load_batch(range(4)), RngState(0), LossConfig(), 5e-4)
        after = model.named_params()
        moved = [k for k in before if not np.array_equal(before[k], after[k].data)]
        assert moved

    def test_all_toggle_combinations_run(self):
        ds = tiny_dataset()
        batch = ds.load_batch(range(4))
        for row in "abcdef":
            model = SSAVDModel(TINY, seed=0)
            opt = AdamW(model.named_params())
            loss = train_step(model, opt, batch, RngState(1), LossConfig.ablation(row), 5e-4)
            assert np.isfinite(loss)

    def test_loss_decreases_over_repeated_steps(self):
        ds = tiny_dataset()
        model = SSAVDModel(TINY, seed=0)
        opt = AdamW(model.named_params())
        batch = ds.load_batch(range(8))
        rng = RngState(2)
        losses = [
            train_step(model, opt, batch, rng.child(i), LossConfig(), 5e-4)
            for i in range(25)
        ]
        assert min(losses[-5:]) < losses[0]


class TestEvaluate:
    def test_report_structure(self):
        ds = tiny_dataset()
        model = SSAVDModel(TINY, seed=0)
        report = evaluate(model, ds)
        for target in ("visual", "audio", "whole"):
            assert 0.0 <= report.acc[target] <= 1.0
            assert report.auc[target] is None or 0.0 <= report.auc[target] <= 1.0
        assert report.param_count == model.param_count()[0]

    def test_empty_dataset_rejected(self):
        model = SSAVDModel(TINY, seed=0)
        with pytest.raises(ValueError):
            evaluate(model, ClipDataset(videos=np.zeros((0,) + TINY.visual_input_shape()),
                                        audios=np.zeros((0,) + TINY.audio_input_shape()),
                                        labels=np.zeros((0, 2))))

    def test_single_class_auc_absent(self):
        scfg = SynthConfig.for_model(TINY, seed=1)
        rng = RngState(1)
        clips = [generate_clip(scfg, "RealV-RealA", rng.child(i)) for i in range(3)]
        ds = ClipDataset(
            videos=np.stack([c[0] for c in clips]),
            audios=np.stack([c[1] for c in clips]),
            labels=np.ones((3, 2), int),
        )
        report = evaluate(SSAVDModel(TINY, seed=0), ds)
        assert report.auc["whole"] is None


class TestTrainLoop:
    def test_short_run_writes_artifacts(self, tmp_path):
        ds = tiny_dataset()
        model = SSAVDModel(TINY, seed=0)
        plan = TrainPlan(epochs=2, batch_size=4, seed=0,
                         augment=AugmentConfig.disabled())
        report, ckpt = train(model, plan, ds, out_dir=str(tmp_path))
        assert (tmp_path / "checkpoint.ssck").exists()
        assert (tmp_path / "report.txt").exists()
        assert ckpt is not None
        assert len(report.loss_curve) == 4
        loaded = MetricReport.load(tmp_path / "report.txt")
        assert loaded.acc == report.acc

    def test_deterministic_checkpoints_and_reports(self, tmp_path):
        def run(out):
            ds = tiny_dataset()
            model = SSAVDModel(TINY, seed=0)
            plan = TrainPlan(epochs=2, batch_size=4, seed=0)
            report, _ = train(model, plan, ds, out_dir=str(out))
            return report

        r1 = run(tmp_path / "a")
        r2 = run(tmp_path / "b")
        ck1 = (tmp_path / "a" / "checkpoint.ssck").read_bytes()
        ck2 = (tmp_path / "b" / "checkpoint.ssck").read_bytes()
        assert ck1 == ck2
        assert (tmp_path / "a" / "report.txt").read_text() == (
            tmp_path / "b" / "report.txt"
        ).read_text()
        assert r1.loss_curve == r2.loss_curve

    def test_different_seed_changes_run(self, tmp_path):
        ds = tiny_dataset()
        p0 = TrainPlan(epochs=1, batch_size=4, seed=0, augment=AugmentConfig.disabled())
        p1 = TrainPlan(epochs=1, batch_size=4, seed=1, augment=AugmentConfig.disabled())
        r0, c0 = train(SSAVDModel(TINY, seed=0), p0, ds)
        r1, c1 = train(SSAVDModel(TINY, seed=0), p1, ds)
        assert c0 != c1

    def test_validation_set_drives_best_checkpoint(self, tmp_path):
        ds = tiny_dataset()
        val = tiny_dataset(seed=3)
        model = SSAVDModel(TINY, seed=0)
        plan = TrainPlan(epochs=2, batch_size=4, seed=0,
                         augment=AugmentConfig.disabled())
        report, ckpt = train(model, plan, ds, val_set=val, out_dir=str(tmp_path))
        assert ckpt is not None
        assert (tmp_path / "checkpoint.ssck").read_bytes() == ckpt

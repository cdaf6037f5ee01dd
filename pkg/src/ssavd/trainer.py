"""Optimization loop, evaluation, and the training plan.

One step: augment -> backbone -> style-shuffled modality predictions ->
whole-video prediction on the true pairing -> latent-shuffled
predictions -> loss assembly -> backward -> AdamW.  The learning rate
decays linearly per epoch.  The best checkpoint by validation
whole-video AUC is retained.  A batch whose gradients are non-finite
(the gated attention can overflow float32 on rare batches) is skipped
with parameters untouched; a non-finite loss that slips past that
guard aborts with the last good checkpoint.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import objective as obj
from . import tensor as T
from .augment import AugmentConfig, augment_clip
from .io import checkpoint_to_bytes, read_tensor
from .metrics import MetricReport, accuracy, auc
from .model import SSAVDModel
from .objective import BatchShufflePlan, LossConfig
from .optim import AdamW, lr_schedule
from .rng import RngState


@dataclass
class TrainPlan:
    epochs: int = 200
    batch_size: int = 32
    lr_start: float = 5e-4
    lr_end: float = 1e-4
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch size must be >= 2 (shuffle strategies pair samples)")


class ClipDataset:
    """Uniform access to clips from manifest records or in-memory arrays."""

    def __init__(self, records=None, root=None, videos=None, audios=None, labels=None):
        if records is not None:
            self.records = list(records)
            self.root = root
            self._videos = None
        else:
            self.records = None
            self._videos = np.asarray(videos)
            self._audios = np.asarray(audios)
            self._labels = np.asarray(labels)

    def __len__(self):
        return len(self.records) if self.records is not None else len(self._videos)

    def load(self, i):
        """Returns (video, audio, y_v, y_a)."""
        if self.records is not None:
            rec = self.records[i]
            video = read_tensor(os.path.join(self.root, rec.visual_path))
            audio = read_tensor(os.path.join(self.root, rec.audio_path))
            return video, audio, rec.y_v, rec.y_a
        return self._videos[i], self._audios[i], int(self._labels[i][0]), int(self._labels[i][1])

    def load_batch(self, indices, rng=None, aug_cfg=None):
        videos, audios, y_v, y_a = [], [], [], []
        for i in indices:
            v, a, yv, ya = self.load(i)
            if rng is not None and aug_cfg is not None:
                v, a = augment_clip(v, a, rng.child(int(i)), aug_cfg)
            videos.append(v)
            audios.append(a)
            y_v.append(yv)
            y_a.append(ya)
        return (
            np.stack(videos),
            np.stack(audios),
            np.asarray(y_v),
            np.asarray(y_a),
        )


def train_step(model, optimizer, batch, plan_rng, loss_cfg: LossConfig, lr):
    """One optimization step; returns the scalar loss value."""
    videos, audios, y_v, y_a = batch
    y_w = y_v & y_a
    n = len(videos)
    shuffle_plan = (
        BatchShufflePlan.sample(n, plan_rng) if (loss_cfg.use_mmssa or loss_cfg.use_lsa or loss_cfg.use_adv)
        else BatchShufflePlan.identity(n)
    )

    feat_v, feat_a = model.features(videos, audios)

    if loss_cfg.use_mmssa:
        p_v, p_a, z_v, z_a = obj.mmssa_predict(model, feat_v, feat_a, shuffle_plan)
    else:
        z_v, z_a = model.latents(feat_v, feat_a)
        p_v = obj.real_probability(model.pred_v(z_v, axis=-1))
        p_a = obj.real_probability(model.pred_a(z_a, axis=-1))

    logits_w = model.pred_w(T.concat([z_v, z_a], axis=-1), axis=-1)
    p_w = obj.real_probability(logits_w)

    lsa_preds = lsa_labels = None
    if loss_cfg.use_lsa:
        lsa_preds, lsa_labels = obj.lsa_predict(model, z_v, z_a, shuffle_plan.latent_perm, y_w)

    cls_term = obj.classification_loss(
        p_v, y_v, p_a, y_a, p_w, y_w, lsa_preds, lsa_labels, beta=loss_cfg.beta
    )
    adv_term = (
        obj.adversarial_loss(model, feat_v, feat_a, shuffle_plan.style_perm)
        if loss_cfg.use_adv
        else None
    )
    con_term = (
        obj.contrast_loss(y_v, z_v, y_a, z_a, loss_cfg.alpha) if loss_cfg.use_con else None
    )
    loss = obj.total_loss(cls_term, adv_term, con_term, loss_cfg)

    optimizer.zero_grad()
    loss.backward()
    optimizer.step(lr=lr)
    return loss.item()


def evaluate(model, dataset: ClipDataset, batch_size=32):
    """Plain inference-path metrics: no shuffle branches, no augmentation."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    scores = {"visual": [], "audio": [], "whole": []}
    labels = {"visual": [], "audio": [], "whole": []}
    for start in range(0, len(dataset), batch_size):
        idx = range(start, min(start + batch_size, len(dataset)))
        videos, audios, y_v, y_a = dataset.load_batch(idx)
        out = model.predict(videos, audios)
        # positive class = fake, so score by fake probability
        scores["visual"].extend((1.0 - out["p_v"].numpy()).tolist())
        scores["audio"].extend((1.0 - out["p_a"].numpy()).tolist())
        scores["whole"].extend((1.0 - out["p_w"].numpy()).tolist())
        labels["visual"].extend((1 - y_v).tolist())
        labels["audio"].extend((1 - y_a).tolist())
        labels["whole"].extend((1 - (y_v & y_a)).tolist())

    report = MetricReport(param_count=model.param_count()[0])
    for target in ("visual", "audio", "whole"):
        report.acc[target] = accuracy(scores[target], labels[target])
        report.auc[target] = auc(scores[target], labels[target])
    return report


def train(model: SSAVDModel, plan: TrainPlan, train_set: ClipDataset, val_set=None, out_dir=None):
    """Full training run; returns (report, best checkpoint bytes or None).

    When ``out_dir`` is given the best checkpoint is written to
    ``checkpoint.ssck`` and the metric report to ``report.txt``.
    """
    optimizer = AdamW(
        model.named_params(), lr=plan.lr_start, weight_decay=0.01
    )
    master = RngState(plan.seed)
    loss_curve = []
    best_score = -np.inf
    best_ckpt = None
    ckpt_path = os.path.join(out_dir, "checkpoint.ssck") if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    n = len(train_set)
    for epoch in range(plan.epochs):
        lr = lr_schedule(epoch, plan.epochs, plan.lr_start, plan.lr_end)
        order = master.child(1, epoch).permutation(n)
        aug_rng = master.child(2, epoch)
        plan_rng = master.child(3, epoch)
        for start in range(0, n, plan.batch_size):
            idx = order[start : start + plan.batch_size]
            if len(idx) < 2:
                continue  # shuffle strategies need at least a pair
            batch = train_set.load_batch(idx, rng=aug_rng, aug_cfg=plan.augment)
            try:
                loss_value = train_step(model, optimizer, batch, plan_rng, plan.loss, lr)
            except FloatingPointError:
                # the gated attention can overflow float32 on a rare
                # batch; the optimizer validates gradients before
                # applying anything, so parameters are intact and the
                # batch can simply be skipped
                continue
            if not np.isfinite(loss_value):
                if ckpt_path and best_ckpt is not None:
                    with open(ckpt_path, "wb") as fh:
                        fh.write(best_ckpt)
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}; last good checkpoint retained"
                )
            loss_curve.append(float(loss_value))

        eval_set = val_set if val_set is not None and len(val_set) else train_set
        val_report = evaluate(model, eval_set, plan.batch_size)
        score = val_report.auc["whole"]
        if score is None:
            score = val_report.acc["whole"]
        if score >= best_score:
            best_score = score
            best_ckpt = checkpoint_bytes(model)

    if ckpt_path and best_ckpt is not None:
        with open(ckpt_path, "wb") as fh:
            fh.write(best_ckpt)

    final = evaluate(model, val_set if val_set is not None and len(val_set) else train_set,
                     plan.batch_size)
    final.loss_curve = loss_curve
    if out_dir:
        final.save(os.path.join(out_dir, "report.txt"))
    return final, best_ckpt


def checkpoint_bytes(model):
    return checkpoint_to_bytes(model)

"""Scikit-learn style estimator facade over the detector.

``X`` is a pair of arrays: videos (N,T,C,H,W) and audios (N,1,L)
matching the chosen preset; ``y`` is (N,2) with per-modality labels
(1 = real, 0 = fake).  ``predict_proba`` returns fake probabilities for
the visual, audio, and whole-video targets.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .augment import AugmentConfig
from .config import ModelConfig
from .model import SSAVDModel
from .objective import LossConfig
from .trainer import ClipDataset, TrainPlan, evaluate, train


def check_clips(videos, audios, cfg: ModelConfig):
    """Validate clip arrays against the model configuration."""
    videos = np.asarray(videos, dtype=np.float32)
    audios = np.asarray(audios, dtype=np.float32)
    if videos.ndim != 5 or videos.shape[1:] != cfg.visual_input_shape():
        raise ValueError(
            f"videos must have shape (N,{','.join(map(str, cfg.visual_input_shape()))}), "
            f"got {videos.shape}"
        )
    if audios.ndim != 3 or audios.shape[1:] != cfg.audio_input_shape():
        raise ValueError(
            f"audios must have shape (N,{','.join(map(str, cfg.audio_input_shape()))}), "
            f"got {audios.shape}"
        )
    if len(videos) != len(audios):
        raise ValueError("videos and audios must pair up one to one")
    if not (np.all(np.isfinite(videos)) and np.all(np.isfinite(audios))):
        raise ValueError("clip arrays must be finite")
    return videos, audios


def check_labels(y, n):
    y = np.asarray(y)
    if y.shape != (n, 2):
        raise ValueError(f"y must have shape ({n}, 2) with (visual, audio) labels, got {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 (fake) or 1 (real)")
    return y.astype(int)


class DeepfakeDetector(BaseEstimator, ClassifierMixin):
    def __init__(
        self,
        preset="desk",
        epochs=10,
        batch_size=8,
        lr_start=5e-4,
        lr_end=1e-4,
        seed=0,
        use_lsa=True,
        use_mmssa=True,
        use_adv=True,
        use_con=True,
        augment=False,
    ):
        self.preset = preset
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.seed = seed
        self.use_lsa = use_lsa
        self.use_mmssa = use_mmssa
        self.use_adv = use_adv
        self.use_con = use_con
        self.augment = augment

    def fit(self, X, y):
        cfg = ModelConfig.preset(self.preset)
        videos, audios = check_clips(X[0], X[1], cfg)
        labels = check_labels(y, len(videos))
        plan = TrainPlan(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr_start=self.lr_start,
            lr_end=self.lr_end,
            seed=self.seed,
            loss=LossConfig(
                use_lsa=self.use_lsa,
                use_mmssa=self.use_mmssa,
                use_adv=self.use_adv,
                use_con=self.use_con,
            ),
            augment=AugmentConfig() if self.augment else AugmentConfig.disabled(),
        )
        dataset = ClipDataset(videos=videos, audios=audios, labels=labels)
        self.model_ = SSAVDModel(cfg, seed=self.seed)
        self.config_ = cfg
        self.report_, _ = train(self.model_, plan, dataset)
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("DeepfakeDetector is not fitted yet")

    def predict_proba(self, X):
        """Fake probabilities, columns (visual, audio, whole)."""
        self._check_fitted()
        videos, audios = check_clips(X[0], X[1], self.config_)
        cols = []
        for start in range(0, len(videos), 32):
            out = self.model_.predict(videos[start : start + 32], audios[start : start + 32])
            cols.append(
                np.stack(
                    [1.0 - out["p_v"].numpy(), 1.0 - out["p_a"].numpy(), 1.0 - out["p_w"].numpy()],
                    axis=1,
                )
            )
        return np.concatenate(cols, axis=0)

    def predict(self, X):
        """Label triples (visual, audio, whole), 1 = real."""
        proba = self.predict_proba(X)
        return (proba <= 0.5).astype(int)

    def score(self, X, y):
        """Mean whole-video accuracy (1 = real convention)."""
        labels = check_labels(y, len(np.asarray(X[0])))
        y_w = labels[:, 0] & labels[:, 1]
        preds = self.predict(X)[:, 2]
        return float((preds == y_w).mean())

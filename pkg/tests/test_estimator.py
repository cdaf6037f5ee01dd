"""Scikit-learn estimator facade and input validation."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ssavd.config import ModelConfig
from ssavd.estimator import DeepfakeDetector, check_clips, check_labels
from ssavd.io import FORGERY_TYPES, labels_for_type
from ssavd.rng import RngState
from ssavd.synth import SynthConfig, generate_clip

TINY = ModelConfig.preset("tiny")


def tiny_clips(n_per_type=2, seed=0):
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
    return (np.stack(videos), np.stack(audios)), np.array(labels)


class TestValidation:
    def test_check_clips_accepts_valid(self):
        X, _ = tiny_clips(1)
        videos, audios = check_clips(X[0], X[1], TINY)
        assert videos.dtype == np.float32
        assert len(videos) == len(audios) == 4

    def test_check_clips_rejects_wrong_video_shape(self):
        with pytest.raises(ValueError):
            check_clips(np.zeros((2, 3, 3, 8, 8)), np.zeros((2, 1, 1920)), TINY)

    def test_check_clips_rejects_wrong_audio_shape(self):
        with pytest.raises(ValueError):
            check_clips(np.zeros((2,) + TINY.visual_input_shape()),
                        np.zeros((2, 1, 100)), TINY)

    def test_check_clips_rejects_count_mismatch(self):
        with pytest.raises(ValueError):
            check_clips(np.zeros((2,) + TINY.visual_input_shape()),
                        np.zeros((3,) + TINY.audio_input_shape()), TINY)

    def test_check_clips_rejects_nonfinite(self):
        v = np.zeros((1,) + TINY.visual_input_shape())
        v[0, 0, 0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            check_clips(v, np.zeros((1,) + TINY.audio_input_shape()), TINY)

    def test_check_labels_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            check_labels(np.zeros(4), 4)

    def test_check_labels_rejects_nonbinary(self):
        with pytest.raises(ValueError):
            check_labels(np.full((4, 2), 2), 4)


class TestDeepfakeDetector:
    def test_sklearn_params_roundtrip(self):
        det = DeepfakeDetector(preset="tiny", epochs=1, seed=3)
        params = det.get_params()
        assert params["preset"] == "tiny"
        assert params["seed"] == 3
        cloned = clone(det)
        assert cloned.get_params() == params

    def test_predict_before_fit_raises(self):
        X, _ = tiny_clips(1)
        with pytest.raises(NotFittedError):
            DeepfakeDetector(preset="tiny").predict(X)

    def test_fit_predict_shapes(self):
        X, y = tiny_clips(1)
        det = DeepfakeDetector(preset="tiny", epochs=1, batch_size=4, seed=0)
        det.fit(X, y)
        proba = det.predict_proba(X)
        preds = det.predict(X)
        assert proba.shape == (4, 3)
        assert preds.shape == (4, 3)
        assert np.all((proba >= 0.0) & (proba <= 1.0))
        assert np.isin(preds, (0, 1)).all()

    def test_predict_consistent_with_proba(self):
        X, y = tiny_clips(1)
        det = DeepfakeDetector(preset="tiny", epochs=1, batch_size=4, seed=0)
        det.fit(X, y)
        proba = det.predict_proba(X)
        preds = det.predict(X)
        assert np.array_equal(preds, (proba <= 0.5).astype(int))

    def test_score_in_unit_interval(self):
        X, y = tiny_clips(1)
        det = DeepfakeDetector(preset="tiny", epochs=1, batch_size=4, seed=0)
        det.fit(X, y)
        assert 0.0 <= det.score(X, y) <= 1.0

    def test_fit_rejects_bad_labels(self):
        X, _ = tiny_clips(1)
        det = DeepfakeDetector(preset="tiny", epochs=1, batch_size=4)
        with pytest.raises(ValueError):
            det.fit(X, np.zeros((4, 3)))

    def test_same_seed_same_predictions(self):
        X, y = tiny_clips(1)
        p1 = DeepfakeDetector(preset="tiny", epochs=1, batch_size=4, seed=5).fit(X, y).predict_proba(X)
        p2 = DeepfakeDetector(preset="tiny", epochs=1, batch_size=4, seed=5).fit(X, y).predict_proba(X)
        assert np.array_equal(p1, p2)

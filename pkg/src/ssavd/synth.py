"""Synthetic four-type audio-visual dataset and stratified splitting.

Real clips couple the two modalities through a shared brightness
envelope: a smooth moving blob whose per-frame brightness amplitude
modulates a sine-carrier audio track.  Visual forgeries replace the
blob with a high-frequency textured patch whose envelope is explicitly
decorrelated from the audio; audio forgeries use a constant-envelope
carrier with phase discontinuities.  Every draw derives from the config
seed, so identical configs produce byte-identical datasets.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig
from .io import FORGERY_TYPES, ManifestRecord, labels_for_type, write_manifest, write_tensor
from .rng import RngState


@dataclass
class SynthConfig:
    counts: dict = field(default_factory=lambda: {t: 10 for t in FORGERY_TYPES})
    frames: int = 10
    height: int = 64
    width: int = 64
    audio_length: int = 4800
    seed: int = 0
    texture_scale: float = 1.0  # strength of the forged-visual texture
    phase_jumps: tuple = (16, 32)  # jump count range for forged audio

    def __post_init__(self):
        for name, count in self.counts.items():
            if name not in FORGERY_TYPES:
                raise ValueError(f"unknown forgery type {name!r}")
            if count < 0:
                raise ValueError("counts must be nonnegative")

    @classmethod
    def for_model(cls, cfg: ModelConfig, counts=None, seed=0):
        return cls(
            counts=dict(counts) if counts else {t: 10 for t in FORGERY_TYPES},
            frames=cfg.frames,
            height=cfg.height,
            width=cfg.width,
            audio_length=cfg.audio_length,
            seed=seed,
        )


def _smooth_envelope(rng, n, lo=0.3, hi=1.0):
    """Random smooth curve in [lo, hi] from low-frequency sinusoids."""
    t = np.linspace(0.0, 1.0, n)
    curve = np.zeros(n)
    for k in (1, 2):
        curve += rng.uniform(-1.0, 1.0) * np.sin(2 * np.pi * k * t + rng.uniform(0, 2 * np.pi))
    span = curve.max() - curve.min()
    if span < 1e-6:
        curve = np.sin(2 * np.pi * t)
        span = curve.max() - curve.min()
    return lo + (hi - lo) * (curve - curve.min()) / span


def _decorrelated_envelope(rng, reference, lo=0.3, hi=1.0):
    """Smooth envelope made orthogonal to ``reference`` (sample corr ~ 0)."""
    n = len(reference)
    raw = _smooth_envelope(rng, n, 0.0, 1.0)
    ref = reference - reference.mean()
    cand = raw - raw.mean()
    denom = float(ref @ ref)
    if denom > 1e-12:
        cand = cand - (cand @ ref) / denom * ref
    span = cand.max() - cand.min()
    if span < 1e-6:
        return np.full(n, (lo + hi) / 2.0)
    return lo + (hi - lo) * (cand - cand.min()) / span


def _blob_frames(rng, cfg, envelope):
    """Smooth Gaussian blob moving along a random path, scaled by envelope."""
    t_idx = np.linspace(0.0, 1.0, cfg.frames)
    yy, xx = np.mgrid[0 : cfg.height, 0 : cfg.width]
    cx0, cx1 = rng.uniform(0.25, 0.75, 2) * cfg.width
    cy0, cy1 = rng.uniform(0.25, 0.75, 2) * cfg.height
    radius = rng.uniform(0.12, 0.2) * min(cfg.height, cfg.width)
    color = rng.uniform(0.5, 1.0, 3)
    frames = np.empty((cfg.frames, 3, cfg.height, cfg.width), dtype=np.float32)
    for i, tau in enumerate(t_idx):
        cx = cx0 + (cx1 - cx0) * tau
        cy = cy0 + (cy1 - cy0) * tau
        blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * radius**2))
        frames[i] = envelope[i] * color[:, None, None] * blob[None]
    return frames


def _texture_frames(rng, cfg, envelope):
    """High-frequency textured patch standing in for visual forgery artifacts."""
    t_idx = np.linspace(0.0, 1.0, cfg.frames)
    yy, xx = np.mgrid[0 : cfg.height, 0 : cfg.width]
    cx0, cx1 = rng.uniform(0.25, 0.75, 2) * cfg.width
    cy0, cy1 = rng.uniform(0.25, 0.75, 2) * cfg.height
    radius = rng.uniform(0.12, 0.2) * min(cfg.height, cfg.width)
    color = rng.uniform(0.5, 1.0, 3)
    # period 4..8 px: high-frequency against the smooth blob but coarse
    # enough to survive the stride-4 stem
    fx, fy = rng.uniform(0.25, 0.5, 2)
    phase = rng.uniform(0, 2 * np.pi)
    texture = 0.5 * (1.0 + np.sin(np.pi * fx * xx + np.pi * fy * yy + phase))
    frames = np.empty((cfg.frames, 3, cfg.height, cfg.width), dtype=np.float32)
    for i, tau in enumerate(t_idx):
        cx = cx0 + (cx1 - cx0) * tau
        cy = cy0 + (cy1 - cy0) * tau
        mask = (((xx - cx) ** 2 + (yy - cy) ** 2) <= radius**2).astype(np.float64)
        patch = cfg.texture_scale * texture * mask
        frames[i] = envelope[i] * color[:, None, None] * patch[None]
    return frames


def _real_audio(rng, cfg, envelope):
    """Sine carrier amplitude-modulated by the (interpolated) envelope."""
    n = cfg.audio_length
    freq = rng.uniform(40.0, 120.0)  # cycles over the clip
    phase = rng.uniform(0, 2 * np.pi)
    tau = np.linspace(0.0, 1.0, n)
    env = np.interp(tau, np.linspace(0.0, 1.0, cfg.frames), envelope)
    wave = 0.8 * env * np.sin(2 * np.pi * freq * tau + phase)
    return wave.astype(np.float32)[None, :]


def _fake_audio(rng, cfg):
    """Constant-envelope carrier with random phase discontinuities."""
    n = cfg.audio_length
    freq = rng.uniform(40.0, 120.0)
    phase = np.full(n, rng.uniform(0, 2 * np.pi))
    n_jumps = int(rng.integers(cfg.phase_jumps[0], cfg.phase_jumps[1] + 1))
    positions = np.sort(rng.integers(n // 10, 9 * n // 10, n_jumps))
    for pos in positions:
        phase[pos:] += rng.uniform(0.5 * np.pi, 1.5 * np.pi)
    tau = np.linspace(0.0, 1.0, n)
    wave = 0.6 * np.sin(2 * np.pi * freq * tau + phase)
    return wave.astype(np.float32)[None, :]


def generate_clip(cfg: SynthConfig, forgery_type, rng):
    """One (video, audio) pair for the given forgery type."""
    audio_env = _smooth_envelope(rng.child(0), cfg.frames)
    y_v, y_a = labels_for_type(forgery_type)

    if y_a == 1:
        audio = _real_audio(rng.child(1), cfg, audio_env)
    else:
        audio = _fake_audio(rng.child(1), cfg)

    if y_v == 1:
        # real visuals share the audio envelope (lip-sync stand-in);
        # with forged audio the envelope still drives the blob
        video = _blob_frames(rng.child(2), cfg, audio_env)
    else:
        visual_env = _decorrelated_envelope(rng.child(3), audio_env)
        video = _texture_frames(rng.child(2), cfg, visual_env)

    noise = rng.child(4)
    video = (video + noise.normal(0.0, 0.01, video.shape)).astype(np.float32)
    audio = (audio + noise.normal(0.0, 0.01, audio.shape)).astype(np.float32)
    return video, audio


def synth_dataset(cfg: SynthConfig, out_dir):
    """Write clips and the JSON-lines manifest; returns the records."""
    data_dir = os.path.join(out_dir, "clips")
    os.makedirs(data_dir, exist_ok=True)
    records = []
    rng = RngState(cfg.seed)
    index = 0
    for forgery_type in FORGERY_TYPES:
        for _ in range(cfg.counts.get(forgery_type, 0)):
            clip_rng = rng.child(index)
            video, audio = generate_clip(cfg, forgery_type, clip_rng)
            clip_id = f"clip{index:05d}"
            vis_rel = os.path.join("clips", f"{clip_id}_v.sstn")
            aud_rel = os.path.join("clips", f"{clip_id}_a.sstn")
            write_tensor(os.path.join(out_dir, vis_rel), video)
            write_tensor(os.path.join(out_dir, aud_rel), audio)
            y_v, y_a = labels_for_type(forgery_type)
            records.append(
                ManifestRecord(clip_id, vis_rel, aud_rel, y_v, y_a, forgery_type)
            )
            index += 1
    write_manifest(os.path.join(out_dir, "manifest.jsonl"), records)
    return records


# -- modality coupling diagnostics ------------------------------------


def visual_brightness_envelope(video):
    """Mean pixel value per frame."""
    return np.asarray(video).mean(axis=(1, 2, 3))


def audio_amplitude_envelope(audio, segments):
    """RMS of each of ``segments`` equal splits of the waveform."""
    wave = np.asarray(audio).reshape(-1)
    n = len(wave) // segments
    trimmed = wave[: n * segments].reshape(segments, n)
    return np.sqrt((trimmed**2).mean(axis=1))


def envelope_correlation(video, audio):
    """Pearson correlation between the two modality envelopes.

    Near-constant envelopes (relative spread < 5%) are treated as
    carrying no envelope signal and yield 0.
    """
    ev = visual_brightness_envelope(video)
    ea = audio_amplitude_envelope(audio, len(ev))
    for env in (ev, ea):
        if env.std() < 0.05 * (abs(env.mean()) + 1e-8):
            return 0.0
    return float(np.corrcoef(ev, ea)[0, 1])


# -- splitting ---------------------------------------------------------


def split(records, ratios, seed):
    """Stratified train/val/test split, deterministic under ``seed``.

    Global sizes are floor(N * ratio) for val and test with train taking
    the remainder; per-stratum quotas follow largest-remainder rounding,
    so each stratum's proportions match the request within one record.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    r_train, r_val, r_test = ratios
    strata = {}
    for rec in records:
        strata.setdefault(rec.forgery_type, []).append(rec)
    for name, members in strata.items():
        if len(members) < 3:
            raise ValueError(f"stratum {name!r} has fewer than 3 records")

    n = len(records)
    want = {"val": int(n * r_val), "test": int(n * r_test)}

    rng = RngState(seed).child(11)
    order = sorted(strata)
    shuffled = {name: [strata[name][i] for i in rng.child(k).permutation(len(strata[name]))]
                for k, name in enumerate(order)}

    quotas = {}
    for part in ("val", "test"):
        ideal = {name: len(strata[name]) * want[part] / n for name in order}
        base = {name: int(ideal[name]) for name in order}
        short = want[part] - sum(base.values())
        by_frac = sorted(order, key=lambda s: (-(ideal[s] - base[s]), s))
        for name in by_frac[:short]:
            base[name] += 1
        quotas[part] = base

    train, val, test = [], [], []
    for name in order:
        members = shuffled[name]
        n_val = quotas["val"][name]
        n_test = quotas["test"][name]
        val.extend(members[:n_val])
        test.extend(members[n_val : n_val + n_test])
        train.extend(members[n_val + n_test :])
    return train, val, test

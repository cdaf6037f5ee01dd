"""Input augmentation: flip, rotation, noise, and JPEG-like degradation.

Each augmentation is applied by an independent coin flip per clip.  The
JPEG approximation quantizes 8x8 block DCT coefficients with a
quality-scaled step, reproducing the blocking/quantization artifact
family without a full codec.  All randomness comes from the caller's
RngState, so fixed seeds give identical batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.fft import dctn, idctn


@dataclass
class AugmentConfig:
    flip: bool = True
    rotate: bool = True
    visual_noise: bool = True
    jpeg: bool = True
    audio_noise: bool = True
    prob: float = 0.5
    rotate_angles: tuple = (-10.0, -5.0, 5.0, 10.0)
    visual_noise_sigma: float = 0.02  # fraction of dynamic range
    audio_noise_sigma: float = 0.005
    jpeg_quality: tuple = (30.0, 80.0)

    @classmethod
    def disabled(cls):
        return cls(flip=False, rotate=False, visual_noise=False, jpeg=False, audio_noise=False)


def horizontal_flip(video):
    """Flip every frame consistently along the width axis."""
    return video[..., ::-1].copy()


def rotate(video, angle):
    """Rotate all frames by ``angle`` degrees with edge padding."""
    return ndimage.rotate(
        video, angle, axes=(-2, -1), reshape=False, order=1, mode="nearest"
    ).astype(video.dtype)


def jpeg_like(video, quality):
    """Blockwise 8x8 DCT quantization on each frame channel."""
    t, c, h, w = video.shape
    ph = (-h) % 8
    pw = (-w) % 8
    x = np.pad(video, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="edge").astype(np.float64)
    hh, ww = x.shape[-2:]
    blocks = x.reshape(t, c, hh // 8, 8, ww // 8, 8)
    coef = dctn(blocks, axes=(3, 5), norm="ortho")
    rng_span = float(video.max() - video.min()) + 1e-8
    u = np.arange(8)
    base = 1.0 + u[:, None] + u[None, :]
    step = base[None, None, None, :, None, :] * rng_span * (100.0 - quality) / 2000.0
    coef = np.round(coef / step) * step
    out = idctn(coef, axes=(3, 5), norm="ortho").reshape(t, c, hh, ww)
    return out[:, :, :h, :w].astype(video.dtype)


def gaussian_noise(x, sigma_frac, rng):
    span = float(x.max() - x.min()) + 1e-8
    return (x + rng.normal(0.0, sigma_frac * span, x.shape)).astype(x.dtype)


def augment_clip(video, audio, rng, cfg: AugmentConfig):
    """Augmented copies of one clip; labels are unchanged by design."""
    v = video
    a = audio
    if cfg.flip and rng.coin(cfg.prob):
        v = horizontal_flip(v)
    if cfg.rotate and rng.coin(cfg.prob):
        angle = cfg.rotate_angles[int(rng.integers(0, len(cfg.rotate_angles)))]
        v = rotate(v, angle)
    if cfg.jpeg and rng.coin(cfg.prob):
        quality = float(rng.uniform(*cfg.jpeg_quality))
        v = jpeg_like(v, quality)
    if cfg.visual_noise and rng.coin(cfg.prob):
        v = gaussian_noise(v, float(rng.uniform(0.0, cfg.visual_noise_sigma)), rng)
    if cfg.audio_noise and rng.coin(cfg.prob):
        a = gaussian_noise(a, float(rng.uniform(0.0, cfg.audio_noise_sigma)), rng)
    return v, a

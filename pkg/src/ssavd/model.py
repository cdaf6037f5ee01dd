"""Single-stream audio-visual backbone and classification heads.

The network is a four-stage pyramid.  Each stage stacks fusion blocks
made of a visual preprocessing step (frame fusion + large-kernel spatial
attention + channel MLP) and a joint self-attention step over
concatenated visual and audio tokens.  The final feature pair feeds a
set of processing/prediction heads for visual, audio, and whole-video
labels, plus parameter-disjoint adversarial duplicates used only at
training time.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .config import ModelConfig
from .layers import (
    Conv1d,
    Conv2d,
    DepthwiseConv1d,
    DepthwiseConv2d,
    Layer,
    Linear,
)
from .rng import RngState
from .tensor import ShapeError, Tensor

MLP_RATIO = 4


class VisualPreprocess(Layer):
    """Frame fusion, shared per-frame spatial attention, channel MLP."""

    def __init__(self, frames, channels, rng, dtype=np.float32):
        self.fuse_in = Linear(frames, frames, rng.child(0), dtype)
        self.proj_p = Linear(channels, channels, rng.child(1), dtype)
        self.dconv5 = DepthwiseConv2d(channels, 5, rng.child(2), padding=2, dtype=dtype)
        self.dconv7 = DepthwiseConv2d(channels, 7, rng.child(3), padding=3, dtype=dtype)
        self.proj_q = Linear(channels, channels, rng.child(4), dtype)
        self.proj_out = Linear(channels, channels, rng.child(5), dtype)
        self.mlp_up = Linear(channels, MLP_RATIO * channels, rng.child(6), dtype)
        self.mlp_down = Linear(MLP_RATIO * channels, channels, rng.child(7), dtype)
        self.fuse_out = Linear(frames, frames, rng.child(8), dtype)

    def __call__(self, x):
        # x: (B, T, C, H, W)
        x = self.fuse_in(x, axis=1)
        p = T.relu(self.proj_p(x, axis=2))
        d = self.dconv7(self.dconv5(p))
        q = T.mul(p, self.proj_q(d, axis=2))
        attn = T.add(p, self.proj_out(q, axis=2))
        h = self.mlp_down(T.relu(self.mlp_up(attn, axis=2)), axis=2)
        return self.fuse_out(h, axis=1)


class JointAttention(Layer):
    """Self-attention over concatenated visual and audio tokens."""

    def __init__(self, cfg: ModelConfig, stage, channels, rng, dtype=np.float32):
        d = cfg.token_dim
        self.reduce_v = Linear(channels, cfg.c_m, rng.child(0), dtype)
        self.reduce_a = Linear(channels, cfg.c_m, rng.child(1), dtype)
        self.pos_embed = Tensor(
            np.zeros((cfg.token_rows(stage), d), dtype=dtype), requires_grad=True, dtype=dtype
        )
        self.attn_out = Linear(d, d, rng.child(2), dtype)
        self.expand_v = Linear(cfg.c_m, channels, rng.child(3), dtype)
        self.expand_a = Linear(cfg.c_m, channels, rng.child(4), dtype)
        self._cfg = cfg
        self._stage = stage

    def tokenize(self, vis, aud):
        """(B,T,C_m,H,W), (B,C_m,L) -> token matrices (B,TN,d), (B,T,d).

        Visual rows are t x t windows in raster order within each frame,
        frames in temporal order; audio rows pool each of the T splits
        down to t*t points per channel.
        """
        cfg = self._cfg
        t, cm, frames = cfg.t, cfg.c_m, cfg.frames
        b, tt, _, h, w = vis.shape
        if h % t or w % t:
            raise ShapeError(f"frame extent {h}x{w} not divisible by window edge {t}")
        hb, wb = h // t, w // t
        kv = T.reshape(vis, (b, frames, cm, hb, t, wb, t))
        kv = T.permute(kv, (0, 1, 3, 5, 2, 4, 6))  # (B,T,hb,wb,C_m,t,t)
        kv = T.reshape(kv, (b, frames * hb * wb, cm * t * t))

        l = aud.shape[-1]
        if l % frames:
            raise ShapeError(f"audio extent {l} not divisible by frame count {frames}")
        ka = T.reshape(aud, (b, cm, frames, l // frames))
        ka = T.adaptive_avg_pool1d(ka, t * t)  # (B,C_m,T,t*t)
        ka = T.permute(ka, (0, 2, 1, 3))
        ka = T.reshape(ka, (b, frames, cm * t * t))
        return kv, ka

    def untokenize(self, kv, ka, h, w, l):
        cfg = self._cfg
        t, cm, frames = cfg.t, cfg.c_m, cfg.frames
        b = kv.shape[0]
        hb, wb = h // t, w // t
        vis = T.reshape(kv, (b, frames, hb, wb, cm, t, t))
        vis = T.permute(vis, (0, 1, 4, 2, 5, 3, 6))
        vis = T.reshape(vis, (b, frames, cm, h, w))

        aud = T.reshape(ka, (b, frames, cm, t * t))
        aud = T.permute(aud, (0, 2, 1, 3))  # (B,C_m,T,t*t)
        aud = T.linear_interp1d(aud, l // frames)
        aud = T.reshape(aud, (b, cm, l))
        return vis, aud

    def __call__(self, vis, aud):
        cfg = self._cfg
        b = vis.shape[0]
        n_vis = cfg.frames * cfg.tokens_per_frame(self._stage)
        h, w = vis.shape[-2], vis.shape[-1]
        l = aud.shape[-1]

        rv = self.reduce_v(vis, axis=2)
        ra = self.reduce_a(aud, axis=1)
        kv, ka = self.tokenize(rv, ra)
        k0 = T.add(T.concat([kv, ka], axis=1), self.pos_embed)
        scores = T.mul(T.matmul(k0, T.swapaxes(k0, 1, 2)), 1.0 / np.sqrt(cfg.token_dim))
        attn = T.softmax(scores, axis=-1)
        k1 = self.attn_out(T.matmul(attn, k0), axis=-1)
        kv1 = k1[:, :n_vis]
        ka1 = k1[:, n_vis:]
        vis1, aud1 = self.untokenize(kv1, ka1, h, w, l)
        out_v = T.add(vis, self.expand_v(vis1, axis=2))
        out_a = T.add(aud, self.expand_a(aud1, axis=1))
        return out_v, out_a


class FusionBlock(Layer):
    def __init__(self, cfg, stage, channels, rng, dtype=np.float32):
        self.vpm = VisualPreprocess(cfg.frames, channels, rng.child(0), dtype)
        self.saavm = JointAttention(cfg, stage, channels, rng.child(1), dtype)

    def __call__(self, vis, aud):
        vis = self.vpm(vis)
        return self.saavm(vis, aud)


class ProcessingHeadV(Layer):
    """Depthwise conv per frame, pool to one scalar per channel, linear."""

    def __init__(self, channels, rng, dtype=np.float32):
        self.dconv = DepthwiseConv2d(channels, 3, rng.child(0), padding=1, dtype=dtype)
        self.proj = Linear(channels, channels, rng.child(1), dtype)

    def __call__(self, vis):
        h = self.dconv(vis)  # (B,T,C,H,W)
        pooled = T.mean(h, axis=(1, 3, 4))
        return self.proj(pooled, axis=-1)


class ProcessingHeadA(Layer):
    def __init__(self, channels, rng, dtype=np.float32):
        self.dconv = DepthwiseConv1d(channels, 3, rng.child(0), padding=1, dtype=dtype)
        self.proj = Linear(channels, channels, rng.child(1), dtype)

    def __call__(self, aud):
        h = self.dconv(aud)  # (B,C,L)
        pooled = T.mean(h, axis=2)
        return self.proj(pooled, axis=-1)


class SSAVDModel(Layer):
    """Full detector: stems, fusion stages, and all nine heads.

    Label convention: 1 = real, 0 = fake; predicted probability is the
    softmax probability of the real class (logit index 1).
    """

    def __init__(self, cfg: ModelConfig, seed=0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        rng = RngState(seed).child(7)
        c = cfg.stage_channels

        self.visual_stem = Conv2d(
            cfg.visual_channels, c[0], 7, rng.child(0), stride=cfg.visual_stem_stride, padding=3, dtype=dtype
        )
        self.audio_stem = Conv1d(
            1, c[0], 25, rng.child(1), stride=cfg.audio_stem_stride, padding=12, dtype=dtype
        )
        self.down_v = [
            Conv2d(c[i], c[i + 1], 3, rng.child(10 + i), stride=2, padding=1, dtype=dtype)
            for i in range(3)
        ]
        self.down_a = [
            Conv1d(c[i], c[i + 1], 5, rng.child(20 + i), stride=2, padding=2, dtype=dtype)
            for i in range(3)
        ]
        self.stages = []
        for s in range(4):
            blocks = [
                FusionBlock(cfg, s, c[s], rng.child(100 + 10 * s + b), dtype)
                for b in range(cfg.stage_depths[s])
            ]
            self.stages.append(blocks)

        c4 = c[3]
        self.head_v = ProcessingHeadV(c4, rng.child(200), dtype)
        self.head_a = ProcessingHeadA(c4, rng.child(201), dtype)
        self.head_v_adv = ProcessingHeadV(c4, rng.child(202), dtype)
        self.head_a_adv = ProcessingHeadA(c4, rng.child(203), dtype)
        self.pred_v = Linear(c4, 2, rng.child(210), dtype)
        self.pred_a = Linear(c4, 2, rng.child(211), dtype)
        self.pred_w = Linear(2 * c4, 2, rng.child(212), dtype)
        self.pred_v_adv = Linear(c4, 2, rng.child(213), dtype)
        self.pred_a_adv = Linear(c4, 2, rng.child(214), dtype)

    # -- parameter plumbing -------------------------------------------

    def named_params(self, prefix=""):
        out = super().named_params(prefix)
        for s, blocks in enumerate(self.stages):
            for b, block in enumerate(blocks):
                out.update(block.named_params(f"{prefix}stages.{s}.{b}."))
        return out

    def param_count(self):
        """Total trainable scalars with a per-component breakdown."""
        breakdown = {}

        def count(layer_params):
            return sum(p.size for p in layer_params.values())

        breakdown["visual_stem"] = count(self.visual_stem.named_params())
        breakdown["audio_stem"] = count(self.audio_stem.named_params())
        breakdown["downsamplers"] = sum(count(d.named_params()) for d in self.down_v + self.down_a)
        for s, blocks in enumerate(self.stages):
            breakdown[f"stage{s + 1}"] = sum(count(b.named_params()) for b in blocks)
        breakdown["heads_main"] = count(self.head_v.named_params()) + count(self.head_a.named_params())
        breakdown["heads_adversarial"] = count(self.head_v_adv.named_params()) + count(
            self.head_a_adv.named_params()
        )
        breakdown["prediction_layers"] = sum(
            count(p.named_params())
            for p in (self.pred_v, self.pred_a, self.pred_w, self.pred_v_adv, self.pred_a_adv)
        )
        total = sum(breakdown.values())
        return total, breakdown

    def zero_grad(self):
        for p in self.named_params().values():
            p.zero_grad()

    # -- forward -------------------------------------------------------

    def _check_inputs(self, video, audio):
        cfg = self.cfg
        if video.shape[-4:] != cfg.visual_input_shape():
            raise ShapeError(
                f"visual clip shape {video.shape} does not match config {cfg.visual_input_shape()}"
            )
        if audio.shape[-2:] != cfg.audio_input_shape():
            raise ShapeError(
                f"audio clip shape {audio.shape} does not match config {cfg.audio_input_shape()}"
            )

    def features(self, video, audio):
        """Backbone forward.

        ``video``: (B,T,C,H,W) or (T,C,H,W); ``audio``: (B,1,L) or (1,L).
        Returns the final feature pair (B,T,C4,H4,W4), (B,C4,L4).
        """
        video = T.as_tensor(video, self.dtype)
        audio = T.as_tensor(audio, self.dtype)
        self._check_inputs(video, audio)
        squeeze = video.ndim == 4
        if squeeze:
            video = T.reshape(video, (1,) + video.shape)
            audio = T.reshape(audio, (1,) + audio.shape)

        vis = self.visual_stem(video)
        # rectify the audio path: its blocks are otherwise linear in the
        # waveform, so energy structure would be invisible downstream
        # (the visual path gets its nonlinearity inside every VPM)
        aud = T.relu(self.audio_stem(audio))
        for s in range(4):
            if s > 0:
                vis = self.down_v[s - 1](vis)
                aud = T.relu(self.down_a[s - 1](aud))
            for block in self.stages[s]:
                vis, aud = block(vis, aud)
        if squeeze:
            vis = vis[0]
            aud = aud[0]
        return vis, aud

    def latents(self, feat_v, feat_a, adversarial=False):
        hv = self.head_v_adv if adversarial else self.head_v
        ha = self.head_a_adv if adversarial else self.head_a
        return hv(feat_v), ha(feat_a)

    def classify(self, feat_v, feat_a):
        """Latents, logits, and real-class probabilities for all targets."""
        z_v, z_a = self.latents(feat_v, feat_a)
        logits_v = self.pred_v(z_v, axis=-1)
        logits_a = self.pred_a(z_a, axis=-1)
        logits_w = self.pred_w(T.concat([z_v, z_a], axis=-1), axis=-1)
        return {
            "z_v": z_v,
            "z_a": z_a,
            "logits_v": logits_v,
            "logits_a": logits_a,
            "logits_w": logits_w,
            "p_v": real_probability(logits_v),
            "p_a": real_probability(logits_a),
            "p_w": real_probability(logits_w),
        }

    def predict(self, video, audio):
        """Inference path: backbone features then plain classification."""
        with T.no_grad():
            feat_v, feat_a = self.features(video, audio)
            if feat_v.ndim == 4:  # single clip
                feat_v = T.reshape(feat_v, (1,) + feat_v.shape)
                feat_a = T.reshape(feat_a, (1,) + feat_a.shape)
            return self.classify(feat_v, feat_a)


def real_probability(logits):
    """Softmax probability of the real class (index 1)."""
    return T.softmax(logits, axis=-1)[..., 1]

"""Training-time machinery: style shuffling, latent shuffling, losses.

Style is the per-channel mean and standard deviation of a feature map
(population variance, eps=1e-5 inside the square root).  Shuffling
styles between batch samples pushes the modality classifiers toward
content; shuffling latents across samples (and relabeling mismatches as
fake) hardens the whole-video classifier; the adversarial term drives
style-only predictions toward the uninformative 1/2 pseudo-label; the
contrast term clusters latents by label with a cosine margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .model import real_probability
from .tensor import ShapeError, Tensor

STYLE_EPS = 1e-5
PROB_EPS = 1e-7
NORM_EPS = 1e-8


@dataclass
class LossConfig:
    """Loss weights and the four ablation toggles."""

    alpha: float = 0.4  # contrast margin
    beta: float = 0.5  # latent-shuffle CE weight
    gamma_cls: float = 1.0
    gamma_adv: float = 0.1
    gamma_con: float = 1.0
    use_lsa: bool = True
    use_mmssa: bool = True
    use_adv: bool = True
    use_con: bool = True

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError("contrast margin must lie in [0, 1)")
        if min(self.gamma_cls, self.gamma_adv, self.gamma_con, self.beta) < 0:
            raise ValueError("loss weights must be nonnegative")

    @classmethod
    def ablation(cls, row):
        """Toggle combinations for the six ablation rows (a)-(f)."""
        rows = {
            "a": dict(use_lsa=False, use_mmssa=False),
            "b": dict(use_lsa=False),
            "c": dict(use_mmssa=False),
            "d": dict(use_adv=False),
            "e": dict(use_con=False),
            "f": dict(),
        }
        return cls(**rows[row])


@dataclass
class BatchShufflePlan:
    """Per-step randomness: style partners, shuffle degrees, latent partners."""

    style_perm: np.ndarray
    omega: np.ndarray  # per sample, strictly inside (0, 1)
    latent_perm: np.ndarray

    @classmethod
    def sample(cls, n, rng):
        return cls(
            style_perm=rng.permutation(n),
            omega=rng.uniform(0.05, 0.95, n),
            latent_perm=rng.permutation(n),
        )

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls(style_perm=idx, omega=np.ones(n), latent_perm=idx)


def _channel_axes(feat):
    """Channel axis and reduction axes for a batched feature tensor.

    Visual features are (B,T,C,H,W) with stats over (T,H,W); audio
    features are (B,C,L) with stats over L.
    """
    if feat.ndim == 5:
        return 2, (1, 3, 4)
    if feat.ndim == 3:
        return 1, (2,)
    raise ShapeError(f"expected batched visual or audio features, got shape {feat.shape}")


def style_stats(feat):
    """Per-channel mean and standard deviation (population, +eps)."""
    _, axes = _channel_axes(feat)
    mu = T.mean(feat, axis=axes, keepdims=True)
    var = T.variance(feat, axis=axes, keepdims=True)
    sigma = T.sqrt(T.add(var, STYLE_EPS))
    return mu, sigma


def style_shuffle(feat_i, feat_j, omega):
    """Content of ``feat_i`` with styles blended toward ``feat_j``.

    omega=1 keeps the original style exactly; omega=0 adopts the
    partner's style.  ``omega`` may be a scalar or a per-sample vector.
    """
    feat_i = T.as_tensor(feat_i)
    feat_j = T.as_tensor(feat_j)
    if feat_i.shape != feat_j.shape:
        raise ShapeError(f"style partners differ in shape: {feat_i.shape} vs {feat_j.shape}")
    mu_i, sig_i = style_stats(feat_i)
    mu_j, sig_j = style_stats(feat_j)
    om = np.asarray(omega, dtype=feat_i.dtype)
    if om.ndim == 1:
        om = om.reshape((-1,) + (1,) * (feat_i.ndim - 1))
    sig = T.add(T.mul(sig_i, om), T.mul(sig_j, 1.0 - om))
    mu = T.add(T.mul(mu_i, om), T.mul(mu_j, 1.0 - om))
    normalized = T.div(T.add(feat_i, T.mul(mu_i, -1.0)), sig_i)
    return T.add(T.mul(sig, normalized), mu)


def mmssa_predict(model, feat_v, feat_a, plan: BatchShufflePlan):
    """Latents and modality predictions from style-shuffled features.

    Labels are untouched: styles carry no label information.
    """
    pv = T.take(feat_v, plan.style_perm, axis=0)
    pa = T.take(feat_a, plan.style_perm, axis=0)
    sv = style_shuffle(feat_v, pv, plan.omega)
    sa = style_shuffle(feat_a, pa, plan.omega)
    z_v, z_a = model.latents(sv, sa)
    p_v = real_probability(model.pred_v(z_v, axis=-1))
    p_a = real_probability(model.pred_a(z_a, axis=-1))
    return p_v, p_a, z_v, z_a


def lsa_predict(model, z_v, z_a, latent_perm, y_w):
    """Whole-video predictions on shuffled latent pairs, labels rewritten.

    Sample i is paired with audio latent latent_perm[i]; its label stays
    y_w[i] only for self-pairs and becomes fake (0) otherwise.
    """
    za_shuf = T.take(z_a, latent_perm, axis=0)
    logits = model.pred_w(T.concat([z_v, za_shuf], axis=-1), axis=-1)
    preds = real_probability(logits)
    y_w = np.asarray(y_w)
    rewritten = np.where(latent_perm == np.arange(len(y_w)), y_w, 0)
    return preds, rewritten


def bce(p_real, y):
    """Mean binary cross-entropy against real-class probabilities."""
    p = T.clamp(T.as_tensor(p_real), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(y, dtype=p.dtype)
    pos = T.mul(T.log(p), y)
    neg = T.mul(T.log(T.add(T.mul(p, -1.0), 1.0)), 1.0 - y)
    return T.mul(T.mean(T.add(pos, neg)), -1.0)


def classification_loss(p_v, y_v, p_a, y_a, p_w, y_w, lsa_preds=None, lsa_labels=None, beta=0.5):
    loss = T.add(T.add(bce(p_v, y_v), bce(p_a, y_a)), bce(p_w, y_w))
    if lsa_preds is not None:
        loss = T.add(loss, T.mul(bce(lsa_preds, lsa_labels), beta))
    return loss


def adversarial_loss(model, feat_v, feat_a, style_perm):
    """Push style-only predictions toward the 1/2 pseudo-label.

    Each sample keeps its own style but receives its partner's content;
    the adversarial heads (and, through them, the backbone) are trained
    so the result is uninformative.  Each term is bounded below by ln 2.
    """
    n = feat_v.shape[0]
    half = np.full(n, 0.5)
    pv = T.take(feat_v, style_perm, axis=0)
    pa = T.take(feat_a, style_perm, axis=0)
    sv = style_shuffle(pv, feat_v, 0.0)
    sa = style_shuffle(pa, feat_a, 0.0)
    z_v, z_a = model.latents(sv, sa, adversarial=True)
    p_v = real_probability(model.pred_v_adv(z_v, axis=-1))
    p_a = real_probability(model.pred_a_adv(z_a, axis=-1))
    return T.add(bce(p_v, half), bce(p_a, half))


def contrast_loss_single(y, z, alpha):
    """Cosine clustering over all ordered pairs, margin on label mismatch."""
    y = np.asarray(y)
    n = z.shape[0]
    # eps inside the root keeps the gradient finite for all-zero rows
    norms = T.sqrt(T.add(T.tsum(T.mul(z, z), axis=-1, keepdims=True), NORM_EPS * NORM_EPS))
    zn = T.div(z, T.add(norms, NORM_EPS))
    sim = T.matmul(zn, T.swapaxes(zn, 0, 1))
    same = (y[:, None] == y[None, :]).astype(sim.dtype)
    pull = T.mul(T.add(T.mul(sim, -1.0), 1.0), same)
    push = T.mul(T.relu(T.add(sim, -alpha)), 1.0 - same)
    return T.mul(T.tsum(T.add(pull, push)), 1.0 / (n * n))


def contrast_loss(y_v, z_v, y_a, z_a, alpha):
    return T.add(contrast_loss_single(y_v, z_v, alpha), contrast_loss_single(y_a, z_a, alpha))


def total_loss(cls_term, adv_term, con_term, cfg: LossConfig):
    """Weighted sum; toggled-off parts contribute zero."""
    zero = Tensor(0.0)
    total = T.mul(cls_term, cfg.gamma_cls)
    total = T.add(total, T.mul(adv_term if adv_term is not None else zero, cfg.gamma_adv))
    total = T.add(total, T.mul(con_term if con_term is not None else zero, cfg.gamma_con))
    return total

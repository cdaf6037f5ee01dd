"""Finite-difference verification of analytic gradients.

Runs the checked closure in 64-bit and compares every analytic partial
against a central difference.  The relative error uses
|analytic - numeric| / max(|analytic|, |numeric|, 1e-8) per element.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, grad_array


def grad_check(fn, inputs, eps=1e-5):
    """Max relative error between analytic and central-difference grads.

    ``fn`` maps the given tensors to a scalar Tensor.  ``inputs`` are
    float64 tensors with ``requires_grad=True``; their ``grad`` buffers
    are overwritten.
    """
    for t in inputs:
        if t.dtype != np.float64:
            raise ValueError("grad_check requires float64 inputs")
        t.zero_grad()

    loss = fn(*inputs)
    if loss.size != 1:
        raise ValueError("grad_check closure must return a scalar")
    loss.backward()
    analytic = [grad_array(t).copy() for t in inputs]

    worst = 0.0
    for t, an in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        an_flat = an.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(fn(*inputs).data)
            flat[i] = orig - eps
            lo = float(fn(*inputs).data)
            flat[i] = orig
            cd = (hi - lo) / (2.0 * eps)
            if max(abs(an_flat[i]), abs(cd)) < 1e-8:
                continue  # both numerically zero; FD roundoff would dominate
            denom = max(abs(an_flat[i]), abs(cd), 1e-8)
            worst = max(worst, abs(an_flat[i] - cd) / denom)
    return worst


def check_op(fn, shapes, rng, eps=1e-5, scale=1.0):
    """Convenience wrapper: random float64 inputs of the given shapes."""
    inputs = [
        Tensor(rng.normal(0.0, scale, s).astype(np.float64), requires_grad=True, dtype=np.float64)
        for s in shapes
    ]
    return grad_check(fn, inputs, eps=eps)


def standard_suite(seeds=5):
    """Finite-difference checks for every differentiable operation family.

    Returns a list of (name, max_relative_error, threshold, passed).
    """
    from . import tensor as T
    from . import objective as obj
    from .rng import RngState

    cases = [
        ("linear", lambda x, w, b: T.tsum(T.mul(T.linear(x, w, b, axis=1), 1.3)),
         [(2, 3, 4), (5, 3), (5,)], 1e-6),
        ("matmul", lambda a, b: T.tsum(T.matmul(a, b) ** 2), [(2, 3, 4), (4, 5)], 1e-6),
        ("conv2d", lambda x, w, b: T.tsum(T.conv2d(x, w, b, stride=2, padding=1) ** 2),
         [(2, 3, 7, 7), (4, 3, 3, 3), (4,)], 1e-5),
        ("depthwise_conv2d",
         lambda x, w, b: T.tsum(T.depthwise_conv2d(x, w, b, padding=2) ** 2),
         [(2, 3, 6, 6), (3, 1, 5, 5), (3,)], 1e-5),
        ("conv1d", lambda x, w, b: T.tsum(T.conv1d(x, w, b, stride=3, padding=2) ** 2),
         [(2, 2, 11), (3, 2, 5), (3,)], 1e-5),
        ("depthwise_conv1d",
         lambda x, w, b: T.tsum(T.depthwise_conv1d(x, w, b, padding=1) ** 2),
         [(2, 3, 9), (3, 1, 3), (3,)], 1e-5),
        ("softmax", lambda x: T.tsum(T.softmax(x, axis=-1) ** 2), [(3, 5)], 1e-6),
        ("relu", lambda x: T.tsum(T.relu(x) ** 2), [(4, 4)], 1e-4),
        ("mean_var", lambda x: T.add(T.mean(x ** 2), T.tsum(T.variance(x, axis=1))),
         [(3, 6)], 1e-6),
        ("adaptive_pool", lambda x: T.tsum(T.adaptive_avg_pool1d(x, 3) ** 2), [(2, 2, 7)], 1e-6),
        ("interp", lambda x: T.tsum(T.linear_interp1d(x, 9) ** 2), [(2, 2, 5)], 1e-6),
        ("take_concat", lambda x: T.tsum(T.concat([T.take(x, [1, 0, 1]), x], axis=0) ** 2),
         [(3, 4)], 1e-6),
        ("style_shuffle",
         lambda a, b: T.tsum(obj.style_shuffle(a, b, 0.3) ** 2), [(2, 2, 3, 4, 4), (2, 2, 3, 4, 4)],
         1e-4),
        ("bce", lambda p: obj.bce(T.mul(T.softmax(p, axis=-1)[..., 1], 1.0), [1.0, 0.0, 1.0]),
         [(3, 2)], 1e-4),
        ("contrast", lambda z: obj.contrast_loss_single([0, 1, 1], z, 0.4), [(3, 5)], 1e-4),
    ]

    results = []
    for case_idx, (name, fn, shapes, threshold) in enumerate(cases):
        worst = 0.0
        for seed in range(seeds):
            rng = RngState(1000 + seed).child(case_idx)
            worst = max(worst, check_op(fn, shapes, rng))
        results.append((name, worst, threshold, worst < threshold))
    return results

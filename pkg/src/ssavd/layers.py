"""Parameterized layers built on the autodiff tensor ops.

Weights use fan-in-scaled uniform initialization, biases start at zero,
and every layer exposes ``named_params`` for checkpointing and
optimization.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


def _uniform_init(rng, shape, fan_in, dtype):
    # variance 2/(3*fan_in): the network has no normalization layers,
    # so a much smaller gain shrinks activations geometrically with
    # depth and starves the classification heads of signal, while full
    # unit gain lets the residual blocks amplify activations without
    # bound (the losses normalize scale away, so nothing reins it in)
    bound = np.sqrt(2.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, shape).astype(dtype), requires_grad=True, dtype=dtype)


def _zeros(shape, dtype):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True, dtype=dtype)


class Layer:
    def named_params(self, prefix=""):
        out = {}
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out[f"{prefix}{name}"] = value
            elif isinstance(value, Layer):
                out.update(value.named_params(f"{prefix}{name}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Layer):
                        out.update(item.named_params(f"{prefix}{name}.{i}."))
        return out


class Linear(Layer):
    def __init__(self, in_features, out_features, rng, dtype=np.float32):
        self.weight = _uniform_init(rng, (out_features, in_features), in_features, dtype)
        self.bias = _zeros((out_features,), dtype)

    def __call__(self, x, axis=-1):
        return T.linear(x, self.weight, self.bias, axis=axis)


class Conv2d(Layer):
    def __init__(self, in_ch, out_ch, kernel, rng, stride=1, padding=0, dtype=np.float32):
        fan_in = in_ch * kernel * kernel
        self.weight = _uniform_init(rng, (out_ch, in_ch, kernel, kernel), fan_in, dtype)
        self.bias = _zeros((out_ch,), dtype)
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return T.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class DepthwiseConv2d(Layer):
    def __init__(self, channels, kernel, rng, stride=1, padding=0, dtype=np.float32):
        fan_in = kernel * kernel
        self.weight = _uniform_init(rng, (channels, 1, kernel, kernel), fan_in, dtype)
        self.bias = _zeros((channels,), dtype)
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return T.depthwise_conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Conv1d(Layer):
    def __init__(self, in_ch, out_ch, kernel, rng, stride=1, padding=0, dtype=np.float32):
        fan_in = in_ch * kernel
        self.weight = _uniform_init(rng, (out_ch, in_ch, kernel), fan_in, dtype)
        self.bias = _zeros((out_ch,), dtype)
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return T.conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class DepthwiseConv1d(Layer):
    def __init__(self, channels, kernel, rng, stride=1, padding=0, dtype=np.float32):
        self.weight = _uniform_init(rng, (channels, 1, kernel), kernel, dtype)
        self.bias = _zeros((channels,), dtype)
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return T.depthwise_conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)

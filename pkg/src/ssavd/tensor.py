"""Dense tensors with reverse-mode automatic differentiation.

Values are numpy arrays (float32 by default, float64 for gradient
checking).  Every differentiable operation records its inputs and a
backward closure on the produced tensor; ``Tensor.backward`` walks the
recorded graph in reverse topological order and accumulates gradients
into every ``requires_grad`` leaf.  All kernels are plain numpy with a
fixed reduction order, so repeated runs are bit-identical.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32


class ShapeError(ValueError):
    """Raised when operand extents are incompatible with an operation."""


_grad_enabled = True


class no_grad:
    """Context manager disabling graph recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _as_array(data, dtype=None):
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype == np.float64 or arr.dtype == np.float32:
        return arr
    return arr.astype(DEFAULT_DTYPE)


class Tensor:
    """A dense n-dimensional array, optionally tracking gradients."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self, grad=None):
        """Populate ``grad`` on every reachable ``requires_grad`` tensor.

        ``self`` must be scalar unless an explicit output gradient is
        given.
        """
        if grad is None:
            if self.size != 1:
                raise ValueError("backward() requires a scalar loss")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)

        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -np.asarray(other))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return mul(self, 1.0 / np.asarray(other))

    def __rtruediv__(self, other):
        return div(as_tensor(other, self.dtype), self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def grad_array(t):
    """Gradient buffer of ``t``; zeros when no gradient reached it."""
    return t.grad if t.grad is not None else np.zeros_like(t.data)


# -- elementwise -------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._make(data, (a, b), backward)


def mul(a, b):
    a = as_tensor(a)
    if not isinstance(b, Tensor):
        scale = np.asarray(b, dtype=a.dtype)

        def backward_s(g):
            return (g * scale,)

        return Tensor._make(a.data * scale, (a,), backward_s)
    data = a.data * b.data

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._make(data, (a, b), backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return Tensor._make(data, (a, b), backward)


def power(a, p):
    a = as_tensor(a)
    p = float(p)
    data = a.data ** p

    def backward(g):
        return (g * p * a.data ** (p - 1.0),)

    return Tensor._make(data, (a,), backward)


def exp(a):
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward(g):
        return (g * data,)

    return Tensor._make(data, (a,), backward)


def log(a):
    a = as_tensor(a)
    data = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return Tensor._make(data, (a,), backward)


def sqrt(a):
    a = as_tensor(a)
    data = np.sqrt(a.data)

    def backward(g):
        return (g * (0.5 / data),)

    return Tensor._make(data, (a,), backward)


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    data = a.data * mask

    def backward(g):
        return (g * mask,)

    return Tensor._make(data, (a,), backward)


def clamp(a, lo, hi):
    a = as_tensor(a)
    data = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        return (g * mask,)

    return Tensor._make(data, (a,), backward)


# -- shape manipulation ------------------------------------------------


def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    data = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(old),)

    return Tensor._make(data, (a,), backward)


def swapaxes(a, ax1, ax2):
    a = as_tensor(a)
    data = np.swapaxes(a.data, ax1, ax2)

    def backward(g):
        return (np.swapaxes(g, ax1, ax2),)

    return Tensor._make(data, (a,), backward)


def moveaxis(a, src, dst):
    a = as_tensor(a)
    data = np.moveaxis(a.data, src, dst)

    def backward(g):
        return (np.moveaxis(g, dst, src),)

    return Tensor._make(data, (a,), backward)


def permute(a, axes):
    a = as_tensor(a)
    data = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def backward(g):
        return (np.transpose(g, inverse),)

    return Tensor._make(data, (a,), backward)


def getitem(a, idx):
    a = as_tensor(a)
    data = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return Tensor._make(data, (a,), backward)


def take(a, indices, axis=0):
    """Gather along ``axis`` with an integer index array."""
    a = as_tensor(a)
    indices = np.asarray(indices)
    data = np.take(a.data, indices, axis=axis)

    def backward(g):
        full = np.zeros_like(a.data)
        moved = np.moveaxis(full, axis, 0)
        np.add.at(moved, indices, np.moveaxis(g, axis, 0))
        return (full,)

    return Tensor._make(data, (a,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(data, tensors, backward)


# -- reductions --------------------------------------------------------


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        g2 = g
        if not keepdims:
            g2 = np.expand_dims(g, axis)
        return (np.broadcast_to(g2, a.shape).copy(),)

    return Tensor._make(data, (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        n = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = 1
        for ax in axes:
            n *= a.shape[ax]
    if n == 0:
        raise ShapeError("mean over an empty reduction set")
    return mul(tsum(a, axis, keepdims), 1.0 / n)


def variance(a, axis=None, keepdims=False):
    """Population variance (divide by n)."""
    mu = mean(a, axis, keepdims=True)
    dev = add(a, mul(mu, -1.0))
    v = mean(mul(dev, dev), axis, keepdims=keepdims)
    return v


# -- linear algebra ----------------------------------------------------


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor._make(data, (a, b), backward)


def linear(x, weight, bias=None, axis=-1):
    """Affine map along one axis: replaces extent ``in`` with ``out``.

    ``weight`` has shape (out, in); ``bias``, when given, has shape
    (out,).
    """
    x = as_tensor(x)
    weight = as_tensor(weight)
    out_f, in_f = weight.shape
    if x.shape[axis] != in_f:
        raise ShapeError(
            f"linear: input extent {x.shape[axis]} along axis {axis} != weight in extent {in_f}"
        )
    xm = moveaxis(x, axis, -1)
    y = matmul(xm, swapaxes(weight, 0, 1))
    if bias is not None:
        y = add(y, bias)
    return moveaxis(y, -1, axis)


def softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        gy = g * data
        return (gy - data * gy.sum(axis=axis, keepdims=True),)

    return Tensor._make(data, (x,), backward)


# -- convolution -------------------------------------------------------


def _conv_out_extent(n, k, stride, padding):
    out = (n + 2 * padding - k) // stride + 1
    if out < 1:
        raise ShapeError(f"convolution output extent < 1 (n={n}, k={k}, s={stride}, p={padding})")
    return out


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """Cross-correlation.  x: (..., C_in, H, W); weight: (C_out, C_in, k, k)."""
    x = as_tensor(x)
    weight = as_tensor(weight)
    c_out, c_in, kh, kw = weight.shape
    if x.shape[-3] != c_in:
        raise ShapeError(f"conv2d: {x.shape[-3]} input channels, weight expects {c_in}")
    h, w = x.shape[-2], x.shape[-1]
    oh = _conv_out_extent(h, kh, stride, padding)
    ow = _conv_out_extent(w, kw, stride, padding)

    pad_spec = [(0, 0)] * (x.ndim - 2) + [(padding, padding), (padding, padding)]
    xp = np.pad(x.data, pad_spec) if padding else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(-2, -1))
    win = win[..., ::stride, ::stride, :, :]  # (..., C_in, oh, ow, kh, kw)
    data = np.einsum("...cxykl,ockl->...oxy", win, weight.data, optimize=True)
    if bias is not None:
        data = data + bias.data.reshape((c_out, 1, 1))

    def backward(g):
        gw = np.einsum("...cxykl,...oxy->ockl", win, g, optimize=True)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                contrib = np.einsum("...oxy,oc->...cxy", g, weight.data[:, :, i, j], optimize=True)
                gxp[..., i : i + stride * oh : stride, j : j + stride * ow : stride] += contrib
        gx = gxp[..., padding : padding + h, padding : padding + w] if padding else gxp
        gb = None
        if bias is not None:
            gb = g.sum(axis=tuple(i for i in range(g.ndim) if i != g.ndim - 3))
        return (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(data, parents, backward)


def depthwise_conv2d(x, weight, bias=None, stride=1, padding=0):
    """One k x k filter per channel.  weight: (C, 1, k, k)."""
    x = as_tensor(x)
    weight = as_tensor(weight)
    c, one, kh, kw = weight.shape
    if one != 1 or x.shape[-3] != c:
        raise ShapeError(f"depthwise_conv2d: weight {weight.shape} vs input channels {x.shape[-3]}")
    h, w = x.shape[-2], x.shape[-1]
    oh = _conv_out_extent(h, kh, stride, padding)
    ow = _conv_out_extent(w, kw, stride, padding)

    pad_spec = [(0, 0)] * (x.ndim - 2) + [(padding, padding), (padding, padding)]
    xp = np.pad(x.data, pad_spec) if padding else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(-2, -1))
    win = win[..., ::stride, ::stride, :, :]
    kern = weight.data[:, 0]
    data = np.einsum("...cxykl,ckl->...cxy", win, kern, optimize=True)
    if bias is not None:
        data = data + bias.data.reshape((c, 1, 1))

    def backward(g):
        gw = np.einsum("...cxykl,...cxy->ckl", win, g, optimize=True)[:, None]
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[..., i : i + stride * oh : stride, j : j + stride * ow : stride] += (
                    g * kern[:, i, j].reshape((c, 1, 1))
                )
        gx = gxp[..., padding : padding + h, padding : padding + w] if padding else gxp
        gb = None
        if bias is not None:
            gb = g.sum(axis=tuple(i for i in range(g.ndim) if i != g.ndim - 3))
        return (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(data, parents, backward)


def conv1d(x, weight, bias=None, stride=1, padding=0):
    """Cross-correlation.  x: (..., C_in, L); weight: (C_out, C_in, k)."""
    x = as_tensor(x)
    weight = as_tensor(weight)
    c_out, c_in, k = weight.shape
    if x.shape[-2] != c_in:
        raise ShapeError(f"conv1d: {x.shape[-2]} input channels, weight expects {c_in}")
    n = x.shape[-1]
    ol = _conv_out_extent(n, k, stride, padding)

    pad_spec = [(0, 0)] * (x.ndim - 1) + [(padding, padding)]
    xp = np.pad(x.data, pad_spec) if padding else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=-1)
    win = win[..., ::stride, :]  # (..., C_in, ol, k)
    data = np.einsum("...cxk,ock->...ox", win, weight.data, optimize=True)
    if bias is not None:
        data = data + bias.data.reshape((c_out, 1))

    def backward(g):
        gw = np.einsum("...cxk,...ox->ock", win, g, optimize=True)
        gxp = np.zeros_like(xp)
        for i in range(k):
            gxp[..., i : i + stride * ol : stride] += np.einsum(
                "...ox,oc->...cx", g, weight.data[:, :, i], optimize=True
            )
        gx = gxp[..., padding : padding + n] if padding else gxp
        gb = None
        if bias is not None:
            gb = g.sum(axis=tuple(i for i in range(g.ndim) if i != g.ndim - 2))
        return (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(data, parents, backward)


def depthwise_conv1d(x, weight, bias=None, stride=1, padding=0):
    """One length-k filter per channel.  weight: (C, 1, k)."""
    x = as_tensor(x)
    weight = as_tensor(weight)
    c, one, k = weight.shape
    if one != 1 or x.shape[-2] != c:
        raise ShapeError(f"depthwise_conv1d: weight {weight.shape} vs input channels {x.shape[-2]}")
    n = x.shape[-1]
    ol = _conv_out_extent(n, k, stride, padding)

    pad_spec = [(0, 0)] * (x.ndim - 1) + [(padding, padding)]
    xp = np.pad(x.data, pad_spec) if padding else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=-1)
    win = win[..., ::stride, :]
    kern = weight.data[:, 0]
    data = np.einsum("...cxk,ck->...cx", win, kern, optimize=True)
    if bias is not None:
        data = data + bias.data.reshape((c, 1))

    def backward(g):
        gw = np.einsum("...cxk,...cx->ck", win, g, optimize=True)[:, None]
        gxp = np.zeros_like(xp)
        for i in range(k):
            gxp[..., i : i + stride * ol : stride] += g * kern[:, i].reshape((c, 1))
        gx = gxp[..., padding : padding + n] if padding else gxp
        gb = None
        if bias is not None:
            gb = g.sum(axis=tuple(i for i in range(g.ndim) if i != g.ndim - 2))
        return (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(data, parents, backward)


# -- resampling --------------------------------------------------------


def _pool_bins(n, out):
    bounds = []
    for i in range(out):
        start = (i * n) // out
        end = -((-(i + 1) * n) // out)  # ceil((i+1)*n/out)
        bounds.append((start, end))
    return bounds


def adaptive_avg_pool1d(x, out):
    """Average contiguous bins along the last axis down (or up) to ``out``.

    Bin boundaries are floor/ceil of the proportional positions, so
    pooling to the input extent is the identity and pooling to 1 is the
    mean.
    """
    x = as_tensor(x)
    n = x.shape[-1]
    if out < 1:
        raise ShapeError("adaptive pool target extent must be >= 1")
    bins = _pool_bins(n, out)
    data = np.empty(x.shape[:-1] + (out,), dtype=x.dtype)
    for i, (s, e) in enumerate(bins):
        data[..., i] = x.data[..., s:e].mean(axis=-1)

    def backward(g):
        gx = np.zeros_like(x.data)
        for i, (s, e) in enumerate(bins):
            gx[..., s:e] += (g[..., i] / (e - s))[..., None]
        return (gx,)

    return Tensor._make(data, (x,), backward)


def linear_interp1d(x, out):
    """Resample the last axis to ``out`` points by linear interpolation.

    Endpoints are aligned, so resampling to the input extent is the
    identity.
    """
    x = as_tensor(x)
    n = x.shape[-1]
    if out < 1:
        raise ShapeError("interpolation target extent must be >= 1")
    if n == 1:
        idx_lo = np.zeros(out, dtype=np.intp)
        idx_hi = idx_lo
        w_hi = np.zeros(out, dtype=x.dtype)
    else:
        pos = np.arange(out) * (n - 1) / (out - 1) if out > 1 else np.array([(n - 1) / 2.0])
        idx_lo = np.floor(pos).astype(np.intp)
        idx_lo = np.minimum(idx_lo, n - 2)
        idx_hi = idx_lo + 1
        w_hi = (pos - idx_lo).astype(x.dtype)
    w_lo = 1.0 - w_hi
    data = x.data[..., idx_lo] * w_lo + x.data[..., idx_hi] * w_hi

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(np.moveaxis(gx, -1, 0), idx_lo, np.moveaxis(g * w_lo, -1, 0))
        np.add.at(np.moveaxis(gx, -1, 0), idx_hi, np.moveaxis(g * w_hi, -1, 0))
        return (gx,)

    return Tensor._make(data, (x,), backward)

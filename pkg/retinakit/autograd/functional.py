# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Differentiable primitives. Every function takes and returns
:class:`~retinakit.autograd.Tensor`; non-tensor operands are promoted to the
dtype of the tensor operand.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from retinakit.autograd.tensor import (
    DomainError,
    Function,
    ShapeError,
    Tensor,
    as_tensor,
    unbroadcast,
)


def _pair(a, b):
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        a = as_tensor(a)
    if not isinstance(a, Tensor):
        a = as_tensor(a, b.data)
    if not isinstance(b, Tensor):
        b = as_tensor(b, a.data)
    return a, b


def _check_broadcast(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError('{}: shapes {} and {} are not broadcast-compatible'.format(
            op, a.shape, b.shape))


def _normalize_axis(axis, ndim):
    if axis is None:
        return None
    if isinstance(axis, int):
        axis = (axis,)
    out = []
    for a in axis:
        if not -ndim <= a < ndim:
            raise ShapeError('axis {} out of range for {} dims'.format(a, ndim))
        out.append(a % ndim)
    return tuple(sorted(set(out)))


# elementwise, binary

class Add(Function):

    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        a, b = self.parents
        return unbroadcast(grad, a.shape), unbroadcast(grad, b.shape)


class Sub(Function):

    def forward(self, a, b):
        return a - b

    def backward(self, grad):
        a, b = self.parents
        return unbroadcast(grad, a.shape), unbroadcast(-grad, b.shape)


class Mul(Function):

    def forward(self, a, b):
        self.save_for_backward(a, b)
        return a * b

    def backward(self, grad):
        a, b = self.saved_values
        pa, pb = self.parents
        ga = unbroadcast(grad * b, pa.shape) if pa.requires_grad else None
        gb = unbroadcast(grad * a, pb.shape) if pb.requires_grad else None
        return ga, gb


class Div(Function):

    def forward(self, a, b):
        if np.any(b == 0):
            raise DomainError('div: division by zero')
        self.save_for_backward(a, b)
        return a / b

    def backward(self, grad):
        a, b = self.saved_values
        pa, pb = self.parents
        ga = unbroadcast(grad / b, pa.shape) if pa.requires_grad else None
        gb = unbroadcast(-grad * a / (b * b), pb.shape) if pb.requires_grad else None
        return ga, gb


class Pow(Function):

    def forward(self, a, b):
        if np.any((a < 0) & (b != np.round(b))):
            raise DomainError('pow: negative base with non-integer exponent')
        if np.any((a == 0) & (b < 0)):
            raise DomainError('pow: zero base with negative exponent')
        out = a ** b
        self.save_for_backward(a, b, out)
        return out

    def backward(self, grad):
        a, b, out = self.saved_values
        pa, pb = self.parents
        ga = gb = None
        if pa.requires_grad:
            ga = unbroadcast(grad * b * a ** (b - 1), pa.shape)
        if pb.requires_grad:
            safe = np.where(a > 0, a, 1)
            gb = unbroadcast(grad * out * np.where(a > 0, np.log(safe), 0), pb.shape)
        return ga, gb


def add(a, b):
    a, b = _pair(a, b)
    _check_broadcast('add', a, b)
    return Add.apply(a, b)


def sub(a, b):
    a, b = _pair(a, b)
    _check_broadcast('sub', a, b)
    return Sub.apply(a, b)


def mul(a, b):
    a, b = _pair(a, b)
    _check_broadcast('mul', a, b)
    return Mul.apply(a, b)


def div(a, b):
    a, b = _pair(a, b)
    _check_broadcast('div', a, b)
    return Div.apply(a, b)


def pow(a, b):
    a, b = _pair(a, b)
    _check_broadcast('pow', a, b)
    return Pow.apply(a, b)


# elementwise, unary

class Neg(Function):

    def forward(self, a):
        return -a

    def backward(self, grad):
        return (-grad,)


class Exp(Function):

    def forward(self, a):
        out = np.exp(a)
        self.save_for_backward(out)
        return out

    def backward(self, grad):
        out, = self.saved_values
        return (grad * out,)


class Log(Function):

    def forward(self, a):
        if np.any(a <= 0):
            raise DomainError('log: operand must be strictly positive')
        self.save_for_backward(a)
        return np.log(a)

    def backward(self, grad):
        a, = self.saved_values
        return (grad / a,)


class Sigmoid(Function):

    def forward(self, a):
        out = special.expit(a)
        self.save_for_backward(out)
        return out

    def backward(self, grad):
        out, = self.saved_values
        return (grad * out * (1 - out),)


class Relu(Function):

    def forward(self, a):
        self.save_for_backward(a)
        return np.maximum(a, 0)

    def backward(self, grad):
        a, = self.saved_values
        return (grad * (a > 0),)


class LeakyRelu(Function):

    def forward(self, a, negative_slope=0.01):
        self.negative_slope = negative_slope
        self.save_for_backward(a)
        return np.where(a > 0, a, a * negative_slope)

    def backward(self, grad):
        a, = self.saved_values
        return (np.where(a > 0, grad, grad * self.negative_slope),)


class Gelu(Function):
    """Exact GELU, x * Phi(x)."""

    def forward(self, a):
        cdf = 0.5 * (1 + special.erf(a * (1 / math.sqrt(2))))
        self.save_for_backward(a, cdf)
        return a * cdf

    def backward(self, grad):
        a, cdf = self.saved_values
        pdf = np.exp(-0.5 * a * a) * (1 / math.sqrt(2 * math.pi))
        return (grad * (cdf + a * pdf),)


class Softplus(Function):

    def forward(self, a):
        self.save_for_backward(a)
        return np.logaddexp(0, a)

    def backward(self, grad):
        a, = self.saved_values
        return (grad * special.expit(a),)


class Abs(Function):

    def forward(self, a):
        self.save_for_backward(a)
        return np.abs(a)

    def backward(self, grad):
        a, = self.saved_values
        return (grad * np.sign(a),)


def neg(a):
    return Neg.apply(a)


def exp(a):
    return Exp.apply(a)


def log(a):
    return Log.apply(a)


def sigmoid(a):
    return Sigmoid.apply(a)


def relu(a):
    return Relu.apply(a)


def leaky_relu(a, negative_slope=0.01):
    return LeakyRelu.apply(a, negative_slope=negative_slope)


def gelu(a):
    return Gelu.apply(a)


def softplus(a):
    return Softplus.apply(a)


def abs(a):
    return Abs.apply(a)


def sqrt(a):
    return pow(a, 0.5)


_BINARY_OPS = {
    'add': add,
    'sub': sub,
    'mul': mul,
    'div': div,
    'pow': pow,
}

_UNARY_OPS = {
    'exp': exp,
    'log': log,
    'sigmoid': sigmoid,
    'relu': relu,
    'gelu': gelu,
}


def elementwise(op, a, b=None):
    """Apply one of the named elementwise operations."""
    if op in _BINARY_OPS:
        if b is None:
            raise ValueError('{} needs two operands'.format(op))
        return _BINARY_OPS[op](a, b)
    if op in _UNARY_OPS:
        if b is not None:
            raise ValueError('{} takes a single operand'.format(op))
        return _UNARY_OPS[op](a)
    raise ValueError('unknown elementwise op: {}'.format(op))


# reductions and shape manipulation

class Sum(Function):

    def forward(self, a, axis=None, keepdims=False):
        self.axis = _normalize_axis(axis, a.ndim)
        self.keepdims = keepdims
        return np.sum(a, axis=self.axis, keepdims=keepdims)

    def backward(self, grad):
        a, = self.parents
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.array(np.broadcast_to(grad, a.shape)),)


class Mean(Function):

    def forward(self, a, axis=None, keepdims=False):
        self.axis = _normalize_axis(axis, a.ndim)
        self.keepdims = keepdims
        if self.axis is None:
            self.count = a.size
        else:
            self.count = int(np.prod([a.shape[i] for i in self.axis]))
        return np.mean(a, axis=self.axis, keepdims=keepdims)

    def backward(self, grad):
        a, = self.parents
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.array(np.broadcast_to(grad / self.count, a.shape)),)


class Reshape(Function):

    def forward(self, a, shape=None):
        try:
            return a.reshape(shape)
        except ValueError:
            raise ShapeError('cannot reshape {} into {}'.format(a.shape, shape))

    def backward(self, grad):
        return (grad.reshape(self.parents[0].shape),)


class Transpose(Function):

    def forward(self, a, axes=None):
        if axes is None:
            axes = tuple(reversed(range(a.ndim)))
        self.axes = tuple(axes)
        return np.transpose(a, self.axes)

    def backward(self, grad):
        return (np.transpose(grad, np.argsort(self.axes)),)


class Index(Function):

    def forward(self, a, index=None):
        self.index = index
        return a[index]

    def backward(self, grad):
        a, = self.parents
        out = np.zeros(a.shape, dtype=grad.dtype)
        np.add.at(out, self.index, grad)
        return (out,)


class Concat(Function):

    def forward(self, *arrays, axis=0):
        self.axis = axis
        self.sizes = [x.shape[axis] for x in arrays]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        splits = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, splits, axis=self.axis))


class BroadcastTo(Function):

    def forward(self, a, shape=None):
        try:
            return np.array(np.broadcast_to(a, shape))
        except ValueError:
            raise ShapeError('cannot broadcast {} to {}'.format(a.shape, shape))

    def backward(self, grad):
        return (unbroadcast(grad, self.parents[0].shape),)


def sum(a, axis=None, keepdims=False):
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims=False):
    return Mean.apply(a, axis=axis, keepdims=keepdims)


def reshape(a, shape):
    return Reshape.apply(a, shape=tuple(shape))


def transpose(a, axes=None):
    return Transpose.apply(a, axes=axes)


def index(a, idx):
    if isinstance(idx, Tensor):
        idx = idx.data.astype(np.int64)
    return Index.apply(a, index=idx)


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ValueError('concat needs at least one tensor')
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise ShapeError('concat: incompatible shapes {} and {}'.format(
                tensors[0].shape, t.shape))
    return Concat.apply(*tensors, axis=axis)


def broadcast_to(a, shape):
    return BroadcastTo.apply(a, shape=tuple(shape))


# linear algebra

class Matmul(Function):

    def forward(self, a, b):
        self.save_for_backward(a, b)
        return np.matmul(a, b)

    def backward(self, grad):
        a, b = self.saved_values
        pa, pb = self.parents
        ga = gb = None
        if pa.requires_grad:
            ga = unbroadcast(np.matmul(grad, np.swapaxes(b, -1, -2)), pa.shape)
        if pb.requires_grad:
            gb = unbroadcast(np.matmul(np.swapaxes(a, -1, -2), grad), pb.shape)
        return ga, gb


def matmul(a, b):
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError('matmul needs operands with at least 2 dims, got {} and {}'.format(
            a.shape, b.shape))
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError('matmul: inner dimensions differ ({} vs {})'.format(
            a.shape, b.shape))
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError('matmul: batch dims {} and {} do not broadcast'.format(
            a.shape[:-2], b.shape[:-2]))
    return Matmul.apply(a, b)


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` with *weight* laid out as (out_features, in_features)."""
    out = matmul(x, transpose(weight))
    if bias is not None:
        out = out + bias
    return out


# convolution

class Conv2dFunction(Function):

    def forward(self, x, w, stride=1, padding=0):
        self.stride, self.padding = stride, padding
        p = padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p > 0 else x
        self.save_for_backward(xp, w)
        windows = sliding_window_view(xp, w.shape[2:], axis=(2, 3))[:, :, ::stride, ::stride]
        # N, C, Ho, Wo, kh, kw  x  O, C, kh, kw  ->  N, Ho, Wo, O
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def backward(self, grad):
        xp, w = self.saved_values
        px, pw = self.parents
        s, p = self.stride, self.padding
        kh, kw = w.shape[2:]
        ho, wo = grad.shape[2:]
        gx = gw = None
        if pw.requires_grad:
            windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::s, ::s]
            gw = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        if px.requires_grad:
            # N, Ho, Wo, C, kh, kw
            cols = np.tensordot(grad, w, axes=([1], [0]))
            gxp = np.zeros(xp.shape, dtype=grad.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s] += \
                        cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            gx = gxp[:, :, p:xp.shape[2] - p, p:xp.shape[3] - p] if p > 0 else gxp
            gx = np.ascontiguousarray(gx)
        return gx, gw


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-D cross-correlation of an (N, C, H, W) input with (O, C, kh, kw) filters."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError('conv2d expects 4-D input and weight, got {} and {}'.format(
            x.shape, weight.shape))
    if x.shape[1] != weight.shape[1]:
        raise ShapeError('conv2d: input has {} channels, weight expects {}'.format(
            x.shape[1], weight.shape[1]))
    if stride < 1 or padding < 0:
        raise ShapeError('conv2d: invalid stride {} / padding {}'.format(stride, padding))
    kh, kw = weight.shape[2:]
    if x.shape[2] + 2 * padding < kh or x.shape[3] + 2 * padding < kw:
        raise ShapeError('conv2d: kernel {}x{} does not fit padded input {}x{}'.format(
            kh, kw, x.shape[2] + 2 * padding, x.shape[3] + 2 * padding))
    out = Conv2dFunction.apply(x, weight, stride=stride, padding=padding)
    if bias is not None:
        out = out + reshape(bias, (1, -1, 1, 1))
    return out


class UpsampleNearest2d(Function):

    def forward(self, x, scale=2):
        self.scale = scale
        return x.repeat(scale, axis=2).repeat(scale, axis=3)

    def backward(self, grad):
        n, c, h, w = self.parents[0].shape
        s = self.scale
        return (grad.reshape(n, c, h, s, w, s).sum(axis=(3, 5)),)


def upsample_nearest2d(x, scale=2):
    if x.ndim != 4:
        raise ShapeError('upsample expects (N, C, H, W), got {}'.format(x.shape))
    return UpsampleNearest2d.apply(x, scale=scale)


# normalized exponentials and losses

class Softmax(Function):

    def forward(self, x, axis=-1):
        self.axis = axis
        e = np.exp(x - np.max(x, axis=axis, keepdims=True))
        out = e / np.sum(e, axis=axis, keepdims=True)
        self.save_for_backward(out)
        return out

    def backward(self, grad):
        out, = self.saved_values
        return (out * (grad - np.sum(grad * out, axis=self.axis, keepdims=True)),)


class LogSoftmax(Function):

    def forward(self, x, axis=-1):
        self.axis = axis
        shifted = x - np.max(x, axis=axis, keepdims=True)
        out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
        self.save_for_backward(out)
        return out

    def backward(self, grad):
        out, = self.saved_values
        return (grad - np.exp(out) * np.sum(grad, axis=self.axis, keepdims=True),)


class CrossEntropy(Function):

    def forward(self, logits, target=None):
        shifted = logits - np.max(logits, axis=-1, keepdims=True)
        lprobs = shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
        self.target = target
        self.save_for_backward(lprobs)
        return -np.mean(lprobs[np.arange(len(target)), target])

    def backward(self, grad):
        lprobs, = self.saved_values
        g = np.exp(lprobs)
        g[np.arange(len(self.target)), self.target] -= 1
        return (g * (grad / len(self.target)),)


def softmax(x, axis=-1):
    return Softmax.apply(x, axis=axis)


def log_softmax(x, axis=-1):
    return LogSoftmax.apply(x, axis=axis)


def cross_entropy(logits, target):
    """Mean negative log-likelihood of integer *target* under softmax(*logits*)."""
    target = np.asarray(target)
    if logits.ndim != 2:
        raise ShapeError('cross_entropy expects (batch, classes) logits, got {}'.format(logits.shape))
    if target.shape != (logits.shape[0],):
        raise ShapeError('cross_entropy: {} targets for {} rows'.format(target.shape, logits.shape[0]))
    if target.dtype.kind not in 'iu' or np.any(target < 0) or np.any(target >= logits.shape[1]):
        raise ValueError('invalid label in {} for {} classes'.format(target.tolist(), logits.shape[1]))
    return CrossEntropy.apply(logits, target=target.astype(np.int64))


def binary_cross_entropy_with_logits(logits, target):
    """Mean of softplus(-l) for target 1 and softplus(l) for target 0."""
    if target not in (0, 1):
        raise ValueError('target must be 0 or 1, got {}'.format(target))
    if target == 1:
        return mean(softplus(neg(logits)))
    return mean(softplus(logits))


# composites

def multi_head_attention(query, key, value, num_heads, in_proj_weight, in_proj_bias=None,
                         out_proj_weight=None, out_proj_bias=None, need_weights=True):
    """Scaled dot-product attention over (batch, time, channel) inputs.

    *in_proj_weight* stacks the query, key and value projections as a
    (3 * embed_dim, embed_dim) matrix. Returns the projected attention output
    and, if *need_weights*, the attention weights averaged over heads.
    """
    bsz, tgt_len, embed_dim = query.shape
    if embed_dim % num_heads != 0:
        raise ShapeError('embed_dim {} is not divisible by num_heads {}'.format(embed_dim, num_heads))
    if key.shape != value.shape or key.shape[0] != bsz or key.shape[2] != embed_dim:
        raise ShapeError('attention: incompatible query {} / key {} / value {}'.format(
            query.shape, key.shape, value.shape))
    src_len = key.shape[1]
    head_dim = embed_dim // num_heads
    scaling = head_dim ** -0.5

    def _proj(x, i):
        w = in_proj_weight[i * embed_dim:(i + 1) * embed_dim]
        b = in_proj_bias[i * embed_dim:(i + 1) * embed_dim] if in_proj_bias is not None else None
        return linear(x, w, b)

    def _split_heads(x, length):
        return transpose(reshape(x, (bsz, length, num_heads, head_dim)), (0, 2, 1, 3))

    q = _split_heads(_proj(query, 0) * scaling, tgt_len)
    k = _split_heads(_proj(key, 1), src_len)
    v = _split_heads(_proj(value, 2), src_len)

    attn_weights = softmax(matmul(q, transpose(k, (0, 1, 3, 2))), axis=-1)
    attn = matmul(attn_weights, v)
    attn = reshape(transpose(attn, (0, 2, 1, 3)), (bsz, tgt_len, embed_dim))
    if out_proj_weight is not None:
        attn = linear(attn, out_proj_weight, out_proj_bias)

    if need_weights:
        attn_weights = mean(attn_weights, axis=1)
    else:
        attn_weights = None
    return attn, attn_weights


def normalize_layer(x, kind='layer_norm', weight=None, bias=None, alpha=None, axes=(-1,), eps=1e-5):
    """Layer normalization over *axes*, optionally blended with the raw input.

    ``layer_norm`` returns ``(x - mean) / sqrt(var + eps) * weight + bias``.
    ``adaptive_norm`` returns ``alpha * layer_norm(x) + (1 - alpha) * x`` where
    *alpha* is a float or a scalar tensor in [0, 1].
    """
    if kind not in ('layer_norm', 'adaptive_norm'):
        raise ValueError('unknown normalization: {}'.format(kind))
    axes = _normalize_axis(axes, x.ndim)
    if any(x.shape[a] == 0 for a in axes):
        raise ShapeError('cannot normalize over an empty feature dimension ({})'.format(x.shape))
    mu = mean(x, axis=axes, keepdims=True)
    centered = x - mu
    var = mean(centered * centered, axis=axes, keepdims=True)
    out = centered * pow(var + eps, -0.5)
    if weight is not None:
        out = out * weight
    if bias is not None:
        out = out + bias
    if kind == 'layer_norm':
        return out
    if alpha is None:
        raise ValueError('adaptive_norm needs a blend weight alpha')
    return alpha * out + (1 - alpha) * x

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Reverse-mode automatic differentiation over NumPy buffers.

Every differentiable primitive is a :class:`Function` subclass. Calling
``SomeFunction.apply(*tensors, **options)`` runs the forward rule on the raw
arrays and, when gradients are enabled and any input requires them, records
the function instance as the ``grad_fn`` of the output so :meth:`Tensor.backward`
can replay the graph in reverse topological order.
"""

import contextlib
import threading

import numpy as np


class ShapeError(ValueError):
    """Raised for incompatible shapes, extents or convolution geometry."""
    pass


class DomainError(ValueError):
    """Raised when an operand lies outside an operation's domain."""
    pass


_state = threading.local()


def _get_state():
    if not hasattr(_state, 'dtype'):
        _state.dtype = np.dtype(np.float32)
        _state.grad_enabled = True
    return _state


def get_default_dtype():
    return _get_state().dtype


def set_default_dtype(dtype):
    dtype = np.dtype(dtype)
    if dtype.kind != 'f':
        raise ValueError('default dtype must be floating point, got {}'.format(dtype))
    _get_state().dtype = dtype


@contextlib.contextmanager
def default_dtype(dtype):
    """Context manager which sets the default floating point precision and
    restores the previous one afterward."""
    prev = get_default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


def is_grad_enabled():
    return _get_state().grad_enabled


@contextlib.contextmanager
def no_grad():
    state = _get_state()
    prev = state.grad_enabled
    state.grad_enabled = False
    try:
        yield
    finally:
        state.grad_enabled = prev


def unbroadcast(grad, shape):
    """Sum *grad* down to *shape*, undoing NumPy broadcasting."""
    if grad.shape == tuple(shape):
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra > 0:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Function(object):
    """A node of the computation graph.

    Holds references to the parent tensors and whatever forward values the
    backward rule needs. Subclasses implement :meth:`forward` on raw arrays and
    :meth:`backward`, which maps the output gradient to one gradient (or
    ``None``) per parent, each already shaped like its parent.
    """

    def __init__(self, *parents):
        self.parents = parents
        self.saved_values = ()

    @property
    def op(self):
        return self.__class__.__name__.lower()

    def save_for_backward(self, *values):
        self.saved_values = values

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs, **kwargs):
        tensors = [as_tensor(x) for x in inputs]
        fn = cls(*tensors)
        out = fn.forward(*[t.data for t in tensors], **kwargs)
        requires_grad = is_grad_enabled() and any(t.requires_grad for t in tensors)
        result = Tensor(out, requires_grad=requires_grad, dtype=_result_dtype(tensors))
        if requires_grad:
            result.grad_fn = fn
        else:
            # release saved buffers as soon as possible
            fn.saved_values = ()
        return result


ComputationNode = Function


def _result_dtype(tensors):
    if not tensors:
        return get_default_dtype()
    return np.result_type(*[t.data.dtype for t in tensors])


def as_tensor(value, like=None):
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


class Tensor(object):
    """N-dimensional array participating in a reverse-mode differentiation graph."""

    # make ``ndarray <op> Tensor`` dispatch to the Tensor's reflected operator
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = get_default_dtype()
        self.data = np.ascontiguousarray(np.asarray(data, dtype=dtype))
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.grad_fn = None
        self._retain_grad = False
        assert int(np.prod(self.data.shape)) == self.data.size

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

    @property
    def is_leaf(self):
        return self.grad_fn is None

    @property
    def T(self):
        return self.transpose()

    def numel(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def retain_grad(self):
        """Keep the gradient of a non-leaf tensor after backward."""
        self._retain_grad = True
        return self

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into the ``grad`` of every reachable leaf
        that requires gradients.

        Repeated calls without zeroing add up. Leaves reached by the traversal
        whose contribution is identically zero still receive a zero-filled
        gradient.
        """
        if not self.requires_grad:
            raise RuntimeError('tensor does not require grad and has no grad_fn')
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(
                    'backward() needs a scalar loss, got shape {}'.format(self.shape)
                )
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.dtype)
            if grad.shape != self.shape:
                raise ShapeError('gradient shape {} does not match tensor shape {}'.format(
                    grad.shape, self.shape))

        grads = {id(self): grad}
        for node in reversed(_topological_order(self)):
            g = grads.pop(id(node), None)
            if g is None:
                g = np.zeros_like(node.data)
            if node.grad_fn is None or node._retain_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            if node.grad_fn is None:
                continue
            parent_grads = node.grad_fn.backward(g)
            for parent, pg in zip(node.grad_fn.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                assert pg.shape == parent.shape, \
                    '{}: gradient shape {} != parent shape {}'.format(
                        node.grad_fn.op, pg.shape, parent.shape)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    def __repr__(self):
        extra = ', requires_grad=True' if self.requires_grad else ''
        return 'Tensor({}{})'.format(np.array2string(self.data, precision=4), extra)

    def __len__(self):
        return self.data.shape[0]

    # arithmetic
    def __add__(self, other):
        return F.add(self, other)

    def __radd__(self, other):
        return F.add(as_tensor(other, self.data), self)

    def __sub__(self, other):
        return F.sub(self, other)

    def __rsub__(self, other):
        return F.sub(as_tensor(other, self.data), self)

    def __mul__(self, other):
        return F.mul(self, other)

    def __rmul__(self, other):
        return F.mul(as_tensor(other, self.data), self)

    def __truediv__(self, other):
        return F.div(self, other)

    def __rtruediv__(self, other):
        return F.div(as_tensor(other, self.data), self)

    def __pow__(self, exponent):
        return F.pow(self, exponent)

    def __neg__(self):
        return F.neg(self)

    def __matmul__(self, other):
        return F.matmul(self, other)

    def __getitem__(self, index):
        return F.index(self, index)

    # shape and reductions
    def sum(self, axis=None, keepdims=False):
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return F.transpose(self, axes or None)

    def exp(self):
        return F.exp(self)

    def log(self):
        return F.log(self)

    def sigmoid(self):
        return F.sigmoid(self)

    def relu(self):
        return F.relu(self)

    def abs(self):
        return F.abs(self)


def _topological_order(root):
    """Post-order DFS over the nodes that require gradients (iterative)."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node.grad_fn is not None:
            for parent in node.grad_fn.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def zeros(shape, requires_grad=False):
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def ones(shape, requires_grad=False):
    return Tensor(np.ones(shape), requires_grad=requires_grad)


def zeros_like(t, requires_grad=False):
    return Tensor(np.zeros_like(t.data), requires_grad=requires_grad, dtype=t.dtype)


from retinakit.autograd import functional as F  # noqa: E402

"""Minimal reverse-mode automatic differentiation on numpy arrays.

Supports the fixed primitive set needed by the rest of the library:
affine maps, relu/tanh/sigmoid, exp/log/sqrt/square, sum/mean, clamp
(subgradient 0 at the kinks), elementwise min/max, concat, slicing,
batched matmul and softmax.  Float32 is the working precision; passing
float64 leaves everywhere yields a float64 graph, which the
finite-difference checker uses as a shadow path.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """Node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, Tensor):
            raise TypeError("Tensor of Tensor")
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # -- graph construction helpers -------------------------------------

    @staticmethod
    def _wrap(x):
        return x if isinstance(x, Tensor) else Tensor(np.asarray(x))

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data, dtype=self.data.dtype)
        self.grad += g

    def backward(self, grad=None):
        """Backpropagate from this node (scalar unless grad is given)."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() on non-scalar needs explicit grad")
            grad = np.ones_like(self.data)
        topo = []
        seen = set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for t in reversed(topo):
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)

    def detach(self):
        return Tensor(self.data)

    # -- operators ------------------------------------------------------

    def __add__(self, other):
        return add(self, Tensor._wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(Tensor._wrap(other)))

    def __rsub__(self, other):
        return add(Tensor._wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, Tensor._wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, Tensor._wrap(other))

    def __rtruediv__(self, other):
        return div(Tensor._wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, Tensor._wrap(other))

    def __getitem__(self, idx):
        return getitem(self, idx)


def _node(data, parents, backward):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


# -- primitives ---------------------------------------------------------


def add(a, b):
    a, b = Tensor._wrap(a), Tensor._wrap(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _node(a.data + b.data, (a, b), backward)


def neg(a):
    def backward(g):
        a._accumulate(-g)

    return _node(-a.data, (a,), backward)


def mul(a, b):
    a, b = Tensor._wrap(a), Tensor._wrap(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = Tensor._wrap(a), Tensor._wrap(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _node(a.data / b.data, (a, b), backward)


def matmul(a, b):
    a, b = Tensor._wrap(a), Tensor._wrap(b)

    def backward(g):
        if a.requires_grad:
            if b.data.ndim == 1:
                a._accumulate(_unbroadcast(np.outer(g, b.data) if a.data.ndim > 1 else g * b.data, a.shape))
            else:
                a._accumulate(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            if a.data.ndim == 1:
                b._accumulate(_unbroadcast(np.outer(a.data, g) if b.data.ndim > 1 else g * a.data, b.shape))
            else:
                b._accumulate(_unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return _node(np.matmul(a.data, b.data), (a, b), backward)


def relu(a):
    mask = a.data > 0

    def backward(g):
        a._accumulate(g * mask)

    return _node(np.where(mask, a.data, 0), (a,), backward)


def tanh(a):
    y = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1 - y * y))

    return _node(y, (a,), backward)


def sigmoid(a):
    y = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        a._accumulate(g * y * (1 - y))

    return _node(y, (a,), backward)


def exp(a):
    y = np.exp(a.data)

    def backward(g):
        a._accumulate(g * y)

    return _node(y, (a,), backward)


def log(a):
    def backward(g):
        a._accumulate(g / a.data)

    return _node(np.log(a.data), (a,), backward)


def sqrt(a):
    y = np.sqrt(a.data)

    def backward(g):
        a._accumulate(g * 0.5 / y)

    return _node(y, (a,), backward)


def square(a):
    def backward(g):
        a._accumulate(g * 2 * a.data)

    return _node(a.data * a.data, (a,), backward)


def tsum(a, axis=None, keepdims=False):
    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.shape).astype(a.data.dtype))
        else:
            ge = np.expand_dims(g, axis) if not keepdims else g
            a._accumulate(np.broadcast_to(ge, a.shape).astype(a.data.dtype))

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is None:
            a._accumulate((np.broadcast_to(g, a.shape) / n).astype(a.data.dtype))
        else:
            ge = np.expand_dims(g, axis) if not keepdims else g
            a._accumulate((np.broadcast_to(ge, a.shape) / n).astype(a.data.dtype))

    return _node(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


def clamp(a, lo, hi):
    """Elementwise clamp; subgradient 0 outside [lo, hi] and at the kinks."""
    inside = (a.data > lo) & (a.data < hi)

    def backward(g):
        a._accumulate(g * inside)

    return _node(np.clip(a.data, lo, hi), (a,), backward)


def minimum(a, b):
    a, b = Tensor._wrap(a), Tensor._wrap(b)
    take_a = a.data <= b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.shape))

    return _node(np.minimum(a.data, b.data), (a, b), backward)


def maximum(a, b):
    a, b = Tensor._wrap(a), Tensor._wrap(b)
    take_a = a.data >= b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.shape))

    return _node(np.maximum(a.data, b.data), (a, b), backward)


def concat(tensors, axis=-1):
    tensors = [Tensor._wrap(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        parts = np.split(g, splits, axis=axis)
        for t, p in zip(tensors, parts):
            if t.requires_grad:
                t._accumulate(p)

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def getitem(a, idx):
    def backward(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        a._accumulate(buf)

    return _node(a.data[idx], (a,), backward)


def reshape(a, shape):
    def backward(g):
        a._accumulate(g.reshape(a.shape))

    return _node(a.data.reshape(shape), (a,), backward)


def swapaxes(a, ax1, ax2):
    def backward(g):
        a._accumulate(np.swapaxes(g, ax1, ax2))

    return _node(np.swapaxes(a.data, ax1, ax2), (a,), backward)


def softmax(a, axis=-1):
    x = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(x)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        a._accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return _node(y, (a,), backward)


def dot(a, b):
    """Inner product of two vectors."""
    return tsum(mul(a, b))


def norm(a, axis=None, keepdims=False):
    return sqrt(tsum(square(a), axis=axis, keepdims=keepdims))


def stop_gradient(a):
    return Tensor._wrap(a).detach()

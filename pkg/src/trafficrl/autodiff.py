"""Minimal reverse-mode automatic differentiation over 2-D float64 arrays.

Just enough operator coverage for the attention, dueling and actor/critic
networks: elementwise arithmetic with numpy-style broadcasting, matmul,
activations, reductions, row gathering and concatenation.  Gradients are
checked against central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to the given (possibly broadcast) shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph plumbing ------------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self):
        """Reverse-mode pass from a scalar output."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen or not t.requires_grad:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        for t in topo:
            t.grad = np.zeros_like(t.data)
        if not topo:
            return  # detached graph: nothing reachable
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t._backward is not None:
                t._backward(t.grad)

    # -- arithmetic ----------------------------------------------------------

    def _coerce(self, other):
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = self._coerce(other)
        def bw(g):
            if self.requires_grad:
                self.grad += _unbroadcast(g, self.data.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(g, other.data.shape)
        return Tensor._make(self.data + other.data, (self, other), bw)

    __radd__ = __add__

    def __neg__(self):
        def bw(g):
            if self.requires_grad:
                self.grad += -g
        return Tensor._make(-self.data, (self,), bw)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        def bw(g):
            if self.requires_grad:
                self.grad += _unbroadcast(g * other.data, self.data.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(g * self.data, other.data.shape)
        return Tensor._make(self.data * other.data, (self, other), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        def bw(g):
            if self.requires_grad:
                self.grad += _unbroadcast(g / other.data, self.data.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(
                    -g * self.data / (other.data ** 2), other.data.shape)
        return Tensor._make(self.data / other.data, (self, other), bw)

    def matmul(self, other):
        other = self._coerce(other)
        def bw(g):
            if self.requires_grad:
                self.grad += g @ other.data.T
            if other.requires_grad:
                other.grad += self.data.T @ g
        return Tensor._make(self.data @ other.data, (self, other), bw)

    def __matmul__(self, other):
        return self.matmul(other)

    def transpose(self):
        def bw(g):
            if self.requires_grad:
                self.grad += g.T
        return Tensor._make(self.data.T, (self,), bw)

    @property
    def T(self):
        return self.transpose()

    # -- activations ---------------------------------------------------------

    def relu(self):
        mask = self.data > 0
        def bw(g):
            if self.requires_grad:
                self.grad += g * mask
        return Tensor._make(self.data * mask, (self,), bw)

    def leaky_relu(self, slope=0.2):
        factor = np.where(self.data > 0, 1.0, slope)
        def bw(g):
            if self.requires_grad:
                self.grad += g * factor
        return Tensor._make(self.data * factor, (self,), bw)

    def tanh(self):
        out_data = np.tanh(self.data)
        def bw(g):
            if self.requires_grad:
                self.grad += g * (1.0 - out_data ** 2)
        return Tensor._make(out_data, (self,), bw)

    def exp(self):
        out_data = np.exp(self.data)
        def bw(g):
            if self.requires_grad:
                self.grad += g * out_data
        return Tensor._make(out_data, (self,), bw)

    def log(self):
        def bw(g):
            if self.requires_grad:
                self.grad += g / self.data
        return Tensor._make(np.log(self.data), (self,), bw)

    def square(self):
        return self * self

    # -- reductions and shaping ----------------------------------------------

    def sum(self, axis=None, keepdims=False):
        def bw(g):
            if not self.requires_grad:
                return
            if axis is None:
                self.grad += np.broadcast_to(g, self.data.shape)
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                self.grad += np.broadcast_to(gg, self.data.shape)
        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims),
                            (self,), bw)

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def gather_rows(self, indices):
        indices = np.asarray(indices, dtype=int)
        def bw(g):
            if self.requires_grad:
                np.add.at(self.grad, indices, g)
        return Tensor._make(self.data[indices], (self,), bw)

    def reshape(self, *shape):
        def bw(g):
            if self.requires_grad:
                self.grad += g.reshape(self.data.shape)
        return Tensor._make(self.data.reshape(*shape), (self,), bw)


def concat(tensors, axis=1):
    """Concatenate along an axis, splitting the gradient back."""
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)
    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t.grad += g[tuple(sl)]
    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis),
                        tensors, bw)


def parameter(data, rng=None, scale=None):
    """Trainable tensor; if rng is given, values are drawn Glorot-style."""
    if rng is not None:
        shape = data
        fan = sum(shape) if len(shape) > 1 else shape[0]
        scale = scale if scale is not None else np.sqrt(2.0 / fan)
        data = rng.normal(0.0, scale, size=shape)
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)

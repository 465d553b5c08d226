"""A small reverse-mode automatic differentiation engine over numpy arrays.

Only the operations the two classifier families need are provided.  Each op
records its parents and a closure that maps the output gradient to parent
gradients; :meth:`Tensor.backward` walks the graph in reverse topological
order.
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def as_tensor(value) -> "Tensor":
    return value if isinstance(value, Tensor) else Tensor(value)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            stack.extend((p, False) for p in node._parents if id(p) not in seen)

        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # arithmetic -------------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor(self.data + other.data, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, _parents=(self,), _backward=lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor(x * y, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)))

    __rmul__ = __mul__

    def __matmul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data

        def backward(g):
            gx = g @ np.swapaxes(y, -1, -2) if y.ndim > 1 else np.multiply.outer(g, y)
            if x.ndim == 1:
                gy = np.multiply.outer(x, g)
            else:
                gy = np.swapaxes(x, -1, -2) @ g
            return _unbroadcast(gx, x.shape), _unbroadcast(gy, y.shape)

        return Tensor(x @ y, _parents=(self, other), _backward=backward)

    def __getitem__(self, index):
        shape = self.shape

        basic = all(isinstance(i, (slice, int, type(None), type(Ellipsis)))
                    for i in (index if isinstance(index, tuple) else (index,)))

        def backward(g):
            out = np.zeros(shape)
            if basic:
                out[index] = g
            else:
                np.add.at(out, index, g)
            return (out,)

        return Tensor(self.data[index], _parents=(self,), _backward=backward)

    # reductions and reshaping ----------------------------------------------
    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,), _backward=backward)

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        old = self.shape
        return Tensor(self.data.reshape(*shape), _parents=(self,), _backward=lambda g: (g.reshape(old),))

    def transpose(self, *axes):
        inverse = np.argsort(axes)
        return Tensor(self.data.transpose(axes), _parents=(self,),
                      _backward=lambda g: (g.transpose(inverse),))

    # pointwise nonlinearities ----------------------------------------------
    def relu(self):
        on = self.data > 0
        return Tensor(self.data * on, _parents=(self,), _backward=lambda g: (g * on,))

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor(out, _parents=(self,), _backward=lambda g: (g * (1 - out * out),))

    def sigmoid(self):
        out = 0.5 * (1 + np.tanh(0.5 * self.data))
        return Tensor(out, _parents=(self,), _backward=lambda g: (g * out * (1 - out),))

    def exp(self):
        out = np.exp(self.data)
        return Tensor(out, _parents=(self,), _backward=lambda g: (g * out,))

    def log(self):
        x = self.data
        return Tensor(np.log(x), _parents=(self,), _backward=lambda g: (g / x,))

    def log_softmax(self, axis=-1):
        x = self.data
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        soft = np.exp(out)

        def backward(g):
            return (g - soft * g.sum(axis=axis, keepdims=True),)

        return Tensor(out, _parents=(self,), _backward=backward)


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, padding: int = 0) -> Tensor:
    """Cross-correlation of ``x`` (B, C, T) with ``weight`` (O, C, K), stride 1.

    Patches are gathered into a contiguous (B * T_out, K * C) matrix so the
    forward pass and both gradients are single matrix products.
    """
    xd, w = x.data, weight.data
    n_out, n_in, k = w.shape
    batch, _, t_in = xd.shape
    xt = np.zeros((batch, t_in + 2 * padding, n_in))
    xt[:, padding:padding + t_in, :] = xd.transpose(0, 2, 1)
    t_out = xt.shape[1] - k + 1
    cols = np.empty((batch, t_out, k, n_in))
    for j in range(k):
        cols[:, :, j, :] = xt[:, j:j + t_out, :]
    cols = cols.reshape(batch * t_out, k * n_in)
    wmat = w.transpose(2, 1, 0).reshape(k * n_in, n_out)  # rows ordered (tap, channel)
    out = cols @ wmat
    if bias is not None:
        out += bias.data
    out = out.reshape(batch, t_out, n_out).transpose(0, 2, 1)

    def backward(g):
        g2 = g.transpose(0, 2, 1).reshape(batch * t_out, n_out)
        gw = (cols.T @ g2).reshape(k, n_in, n_out).transpose(2, 1, 0)
        gcols = (g2 @ wmat.T).reshape(batch, t_out, k, n_in)
        gxt = np.zeros(xt.shape)
        for j in range(k):
            gxt[:, j:j + t_out, :] += gcols[:, :, j, :]
        gx = gxt[:, padding:padding + t_in, :].transpose(0, 2, 1)
        gb = g.sum(axis=(0, 2)) if bias is not None else None
        return (gx, gw, gb) if bias is not None else (gx, gw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor(out, _parents=parents, _backward=backward)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                  _parents=tuple(tensors), _backward=backward)

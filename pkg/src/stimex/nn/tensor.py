"""Minimal reverse-mode autodiff over dense float64 numpy arrays."""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = ["Tensor", "Parameter", "as_tensor", "concat", "stack", "take_pairs"]


def as_tensor(x) -> "Tensor":
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # Sum a gradient back down to `shape` after numpy broadcasting.
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _accum(t: "Tensor", g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


class Tensor:
    """One node in a reverse-mode computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _attach(self, parents: tuple["Tensor", ...], backward) -> "Tensor":
        if any(p.requires_grad for p in parents):
            self.requires_grad = True
            self._parents = parents
            self._backward = backward
        return self

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor(self.data + other.data)

        def backward():
            if self.requires_grad:
                _accum(self, _unbroadcast(out.grad, self.data.shape))
            if other.requires_grad:
                _accum(other, _unbroadcast(out.grad, other.data.shape))

        return out._attach((self, other), backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        out = Tensor(-self.data)

        def backward():
            if self.requires_grad:
                _accum(self, -out.grad)

        return out._attach((self,), backward)

    def __sub__(self, other) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor(self.data * other.data)

        def backward():
            if self.requires_grad:
                _accum(self, _unbroadcast(out.grad * other.data, self.data.shape))
            if other.requires_grad:
                _accum(other, _unbroadcast(out.grad * self.data, other.data.shape))

        return out._attach((self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor(self.data / other.data)

        def backward():
            if self.requires_grad:
                _accum(self, _unbroadcast(out.grad / other.data, self.data.shape))
            if other.requires_grad:
                _accum(
                    other,
                    _unbroadcast(-out.grad * self.data / other.data**2, other.data.shape),
                )

        return out._attach((self, other), backward)

    def __rtruediv__(self, other) -> "Tensor":
        return as_tensor(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        out = Tensor(self.data**exponent)

        def backward():
            if self.requires_grad:
                _accum(self, exponent * self.data ** (exponent - 1) * out.grad)

        return out._attach((self,), backward)

    def __matmul__(self, other) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data
        out = Tensor(a @ b)

        def backward():
            g = out.grad
            if a.ndim == 2 and b.ndim == 2:
                ga, gb = g @ b.T, a.T @ g
            elif a.ndim == 1 and b.ndim == 2:
                ga, gb = b @ g, np.outer(a, g)
            elif a.ndim == 2 and b.ndim == 1:
                ga, gb = np.outer(g, b), a.T @ g
            elif a.ndim == 1 and b.ndim == 1:
                ga, gb = g * b, g * a
            else:
                raise ValueError("matmul supports only 1-D and 2-D operands")
            if self.requires_grad:
                _accum(self, ga)
            if other.requires_grad:
                _accum(other, gb)

        return out._attach((self, other), backward)

    # -- shape ------------------------------------------------------------

    @property
    def T(self) -> "Tensor":
        out = Tensor(self.data.T)

        def backward():
            if self.requires_grad:
                _accum(self, out.grad.T)

        return out._attach((self,), backward)

    def reshape(self, shape) -> "Tensor":
        out = Tensor(self.data.reshape(shape))

        def backward():
            if self.requires_grad:
                _accum(self, out.grad.reshape(self.data.shape))

        return out._attach((self,), backward)

    def __getitem__(self, idx) -> "Tensor":
        out = Tensor(self.data[idx])

        def backward():
            g = np.zeros_like(self.data)
            if isinstance(idx, (int, np.integer, slice)):
                g[idx] += out.grad
            else:
                np.add.at(g, idx, out.grad)
            _accum(self, g)

        return out._attach((self,), backward)

    # -- reductions ---------------------------------------------------------

    def sum(self, axis: int | None = None) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis))

        def backward():
            if not self.requires_grad:
                return
            if axis is None:
                _accum(self, np.broadcast_to(out.grad, self.data.shape))
            else:
                _accum(self, np.broadcast_to(np.expand_dims(out.grad, axis), self.data.shape))

        return out._attach((self,), backward)

    def mean(self, axis: int | None = None) -> "Tensor":
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / count)

    def logsumexp(self, axis: int | None = None) -> "Tensor":
        m = np.max(self.data, axis=axis, keepdims=True)
        y_keep = m + np.log(np.sum(np.exp(self.data - m), axis=axis, keepdims=True))
        out = Tensor(y_keep.reshape(()) if axis is None else np.squeeze(y_keep, axis=axis))

        def backward():
            if not self.requires_grad:
                return
            soft = np.exp(self.data - y_keep)
            if axis is None:
                _accum(self, soft * out.grad)
            else:
                _accum(self, soft * np.expand_dims(out.grad, axis))

        return out._attach((self,), backward)

    # -- elementwise nonlinearities ------------------------------------------

    def tanh(self) -> "Tensor":
        y = np.tanh(self.data)
        out = Tensor(y)

        def backward():
            if self.requires_grad:
                _accum(self, (1.0 - y * y) * out.grad)

        return out._attach((self,), backward)

    def sigmoid(self) -> "Tensor":
        e = np.exp(-np.abs(self.data))  # stable: exponent is never positive
        y = np.where(self.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        out = Tensor(y)

        def backward():
            if self.requires_grad:
                _accum(self, y * (1.0 - y) * out.grad)

        return out._attach((self,), backward)

    def relu(self) -> "Tensor":
        mask = self.data > 0
        out = Tensor(np.where(mask, self.data, 0.0))

        def backward():
            if self.requires_grad:
                _accum(self, mask * out.grad)

        return out._attach((self,), backward)

    def exp(self) -> "Tensor":
        y = np.exp(self.data)
        out = Tensor(y)

        def backward():
            if self.requires_grad:
                _accum(self, y * out.grad)

        return out._attach((self,), backward)

    def log(self) -> "Tensor":
        out = Tensor(np.log(self.data))

        def backward():
            if self.requires_grad:
                _accum(self, out.grad / self.data)

        return out._attach((self,), backward)

    def softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - np.max(self.data, axis=axis, keepdims=True)
        e = np.exp(shifted)
        s = e / e.sum(axis=axis, keepdims=True)
        out = Tensor(s)

        def backward():
            if self.requires_grad:
                inner = (out.grad * s).sum(axis=axis, keepdims=True)
                _accum(self, s * (out.grad - inner))

        return out._attach((self,), backward)

    # -- backward pass ---------------------------------------------------------

    def backward(self) -> None:
        """Backpropagate from a scalar loss through the whole graph."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        # Iterative postorder DFS: recursion depth scales with sequence length.
        order: list[Tensor] = []
        visited = {id(self)}
        stack: list[tuple[Tensor, iter]] = [(self, iter(self._parents))]
        while stack:
            node, parents = stack[-1]
            advanced = False
            for p in parents:
                if id(p) not in visited:
                    visited.add(id(p))
                    stack.append((p, iter(p._parents)))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()


class Parameter(Tensor):
    """Named trainable tensor."""

    __slots__ = ("name", "trainable")

    def __init__(self, name: str, data, trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.name = name
        self.trainable = trainable

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]

    def backward():
        offset = 0
        for t, size in zip(tensors, sizes):
            if t.requires_grad:
                sl = [slice(None)] * out.grad.ndim
                sl[axis] = slice(offset, offset + size)
                _accum(t, out.grad[tuple(sl)])
            offset += size

    return out._attach(tuple(tensors), backward)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-shape tensors along a new leading axis."""
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.stack([t.data for t in tensors]))

    def backward():
        for k, t in enumerate(tensors):
            if t.requires_grad:
                _accum(t, out.grad[k])

    return out._attach(tuple(tensors), backward)


def take_pairs(t: Tensor, rows, cols) -> Tensor:
    """Pick ``t[rows[k], cols[k]]`` for each k; used for CRF path scoring."""
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    out = Tensor(t.data[rows, cols])

    def backward():
        if t.requires_grad:
            g = np.zeros_like(t.data)
            np.add.at(g, (rows, cols), out.grad)
            _accum(t, g)

    return out._attach((t,), backward)

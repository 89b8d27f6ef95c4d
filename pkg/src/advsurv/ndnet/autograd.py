"""Reverse-mode automatic differentiation over dense float64 arrays.

A `Tensor` wraps an ndarray and records the operation that produced it,
building an acyclic define-by-run graph. `backward()` on a scalar walks the
graph once in reverse topological order and accumulates adjoints into the
`.grad` of every reachable node; adjoints of visited nodes are reset at the
start of each backward pass, so repeated passes over the same graph are
idempotent. Parameters never reached by the loss simply keep a zero/None
gradient.

Every op output is checked for NaN/Inf: a non-finite forward value raises
immediately instead of propagating silently.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_EXP_CLIP = 80.0


class NonFiniteError(FloatingPointError):
    """A forward computation produced NaN or Inf."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing NumPy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError("non-finite values in tensor input")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None
        self.op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- graph construction ------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple, backward, op: str) -> "Tensor":
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(f"non-finite output of op {op!r}")
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = parents if out.requires_grad else ()
        out._backward = backward if out.requires_grad else None
        out.op = op
        return out

    @staticmethod
    def _lift(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    # -- elementwise arithmetic ---------------------------------------------

    def __add__(self, other):
        other = Tensor._lift(other)
        data = self.data + other.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor._result(data, (self, other), backward, "add")

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            if self.requires_grad:
                self._accumulate(-g)

        return Tensor._result(-self.data, (self,), backward, "neg")

    def __sub__(self, other):
        other = Tensor._lift(other)
        data = self.data - other.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(-g, other.data.shape))

        return Tensor._result(data, (self, other), backward, "sub")

    def __rsub__(self, other):
        return Tensor._lift(other) - self

    def __mul__(self, other):
        other = Tensor._lift(other)
        data = self.data * other.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return Tensor._result(data, (self, other), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._lift(other)
        with np.errstate(divide="ignore", invalid="ignore"):
            data = self.data / other.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(
                    _unbroadcast(-g * self.data / (other.data * other.data), other.data.shape)
                )

        return Tensor._result(data, (self, other), backward, "div")

    def __rtruediv__(self, other):
        return Tensor._lift(other) / self

    # -- linear algebra ------------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        other = Tensor._lift(other)
        data = self.data @ other.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        return Tensor._result(data, (self, other), backward, "matmul")

    __matmul__ = matmul

    def transpose(self) -> "Tensor":
        def backward(g):
            if self.requires_grad:
                self._accumulate(g.T)

        return Tensor._result(self.data.T, (self,), backward, "transpose")

    # -- nonlinearities --------------------------------------------------------

    def exp(self) -> "Tensor":
        clipped = np.clip(self.data, -_EXP_CLIP, _EXP_CLIP)
        data = np.exp(clipped)
        inside = (self.data > -_EXP_CLIP) & (self.data < _EXP_CLIP)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * data * inside)

        return Tensor._result(data, (self,), backward, "exp")

    def log(self) -> "Tensor":
        with np.errstate(divide="ignore", invalid="ignore"):
            data = np.log(self.data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g / self.data)

        return Tensor._result(data, (self,), backward, "log")

    def sqrt(self) -> "Tensor":
        with np.errstate(invalid="ignore"):
            data = np.sqrt(self.data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * 0.5 / data)

        return Tensor._result(data, (self,), backward, "sqrt")

    def relu(self) -> "Tensor":
        mask = self.data > 0

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * mask)

        return Tensor._result(self.data * mask, (self,), backward, "relu")

    def abs(self) -> "Tensor":
        sign = np.sign(self.data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * sign)

        return Tensor._result(np.abs(self.data), (self,), backward, "abs")

    def sigmoid(self) -> "Tensor":
        data = special.expit(self.data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * data * (1.0 - data))

        return Tensor._result(data, (self,), backward, "sigmoid")

    def softplus(self) -> "Tensor":
        """log(1 + exp(x)), evaluated stably."""
        data = np.logaddexp(0.0, self.data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * special.expit(self.data))

        return Tensor._result(data, (self,), backward, "softplus")

    def std_normal_logsf(self) -> "Tensor":
        """log(1 - Phi(x)) for the standard normal CDF Phi."""
        data = special.log_ndtr(-self.data)
        log_pdf = -0.5 * self.data * self.data - _LOG_SQRT_2PI

        def backward(g):
            if self.requires_grad:
                self._accumulate(-g * np.exp(log_pdf - data))

        return Tensor._result(data, (self,), backward, "std_normal_logsf")

    # -- reductions, shape ops ---------------------------------------------------

    def sum(self, axis: int | None = None) -> "Tensor":
        data = self.data.sum(axis=axis)
        shape = self.data.shape

        def backward(g):
            if self.requires_grad:
                if axis is None:
                    self._accumulate(np.broadcast_to(g, shape).copy())
                else:
                    self._accumulate(np.broadcast_to(np.expand_dims(g, axis), shape).copy())

        return Tensor._result(data, (self,), backward, "sum")

    def mean(self, axis: int | None = None) -> "Tensor":
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r})"

    # -- reverse pass -------------------------------------------------------------

    def _topo_order(self) -> list:
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
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into `.grad` of every reachable node.

        Visited adjoints are reset first, so calling backward twice on the
        same graph yields identical gradients.
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order = self._topo_order()
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def concat(tensors: list, axis: int = 1) -> Tensor:
    tensors = [Tensor._lift(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                t._accumulate(g[tuple(index)])

    return Tensor._result(data, tuple(tensors), backward, "concat")


class Parameter(Tensor):
    """A named trainable leaf tensor."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def zero_grad(params) -> None:
    for p in params:
        p.grad = None


def grad_of(param: Tensor) -> np.ndarray:
    """Gradient of a parameter, with None meaning zero (unreached by the loss)."""
    return param.grad if param.grad is not None else np.zeros_like(param.data)

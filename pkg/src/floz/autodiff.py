"""Minimal reverse-mode differentiation over dense numpy arrays, plus Adam.

The primitive set is deliberately small and closed: matmul, masked matmul,
add, elementwise mul, neg, tanh, exp, log, abs, sum, mean, axis-sum,
clamping against constants, reshape and column gather/permute.  Everything
the flow and the loss terms need composes out of these, and each primitive
has an exhaustively testable analytic derivative.

All computation is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    # sum away leading axes added by broadcasting
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    """A node in the implicit tape: a value, its parents, and a pullback."""

    __slots__ = ("value", "grad", "_parents", "_backward", "op")

    def __init__(self, value, parents=(), backward=None, op="const"):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    # -- graph construction helpers -------------------------------------

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def __add__(self, other):
        other = Tensor._lift(other)
        out = Tensor(self.value + other.value, (self, other), op="add")

        def bw(g):
            return (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape))

        out._backward = bw
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.value, (self,), op="neg")
        out._backward = lambda g: (-g,)
        return out

    def __sub__(self, other):
        return self + (-Tensor._lift(other))

    def __rsub__(self, other):
        return Tensor._lift(other) + (-self)

    def __mul__(self, other):
        other = Tensor._lift(other)
        out = Tensor(self.value * other.value, (self, other), op="mul")

        def bw(g):
            return (
                _unbroadcast(g * other.value, self.shape),
                _unbroadcast(g * self.value, other.shape),
            )

        out._backward = bw
        return out

    __rmul__ = __mul__

    def matmul(self, other: "Tensor") -> "Tensor":
        other = Tensor._lift(other)
        out = Tensor(self.value @ other.value, (self, other), op="matmul")

        def bw(g):
            return (g @ other.value.T, self.value.T @ g)

        out._backward = bw
        return out

    def masked_matmul(self, weight: "Tensor", mask: np.ndarray) -> "Tensor":
        """self @ (weight * mask) with a constant 0/1 mask."""
        w = weight.value * mask
        out = Tensor(self.value @ w, (self, weight), op="masked_matmul")

        def bw(g):
            return (g @ w.T, (self.value.T @ g) * mask)

        out._backward = bw
        return out

    def tanh(self):
        t = np.tanh(self.value)
        out = Tensor(t, (self,), op="tanh")
        out._backward = lambda g: (g * (1.0 - t * t),)
        return out

    def exp(self):
        e = np.exp(self.value)
        out = Tensor(e, (self,), op="exp")
        out._backward = lambda g: (g * e,)
        return out

    def log(self):
        out = Tensor(np.log(self.value), (self,), op="log")
        out._backward = lambda g: (g / self.value,)
        return out

    def abs(self):
        out = Tensor(np.abs(self.value), (self,), op="abs")
        out._backward = lambda g: (g * np.sign(self.value),)
        return out

    def sum(self, axis=None):
        out = Tensor(self.value.sum(axis=axis), (self,), op="sum")

        def bw(g):
            if axis is None:
                return (np.broadcast_to(g, self.shape).copy(),)
            return (np.broadcast_to(np.expand_dims(g, axis), self.shape).copy(),)

        out._backward = bw
        return out

    def mean(self, axis=None):
        n = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def clamp_min(self, floor: float):
        """max(self, floor); gradient is zero where the floor is active."""
        out = Tensor(np.maximum(self.value, floor), (self,), op="clamp_min")
        out._backward = lambda g: (g * (self.value > floor),)
        return out

    def clamp_max(self, ceil: float):
        out = Tensor(np.minimum(self.value, ceil), (self,), op="clamp_max")
        out._backward = lambda g: (g * (self.value < ceil),)
        return out

    def reshape(self, *shape):
        out = Tensor(self.value.reshape(*shape), (self,), op="reshape")
        out._backward = lambda g: (g.reshape(self.shape),)
        return out

    def take_cols(self, idx: np.ndarray):
        """Gather/permute columns of a 2-D tensor by integer index."""
        idx = np.asarray(idx, dtype=np.intp)
        out = Tensor(self.value[:, idx], (self,), op="take_cols")

        def bw(g):
            gx = np.zeros_like(self.value)
            np.add.at(gx, (slice(None), idx), g)
            return (gx,)

        out._backward = bw
        return out

    # -- backward pass ---------------------------------------------------

    def backward(self):
        if self.value.ndim != 0:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        for node in topo:
            node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g


class Parameter(Tensor):
    """A trainable leaf tensor."""

    def __init__(self, value):
        super().__init__(value, op="param")


def evaluate_with_gradients(fn, params: list[Parameter]):
    """Evaluate a scalar-valued graph builder and return (value, grads).

    ``fn`` takes no arguments and returns a scalar Tensor built from
    ``params``.  Gradients of parameters the graph never touches are zero.
    """
    out = fn()
    if not np.isfinite(out.value):
        raise NumericalError(_locate_nonfinite(out))
    out.backward()
    grads = []
    for p in params:
        if p.grad is None:
            grads.append(np.zeros_like(p.value))
        else:
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise NumericalError("non-finite gradient for a parameter")
            grads.append(g)
    return float(out.value), grads


def _locate_nonfinite(root: Tensor) -> str:
    """Walk the graph to name the first op producing a non-finite value."""
    stack, seen = [root], set()
    culprit = root.op
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if not np.all(np.isfinite(node.value)):
            culprit = node.op
            stack.extend(node._parents)
    return f"non-finite intermediate produced by op '{culprit}'"


@dataclass
class AdamState:
    """First/second moment accumulators and the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: list[Parameter], learning_rate: float = 1e-3,
             beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        return cls(
            m=[np.zeros_like(p.value) for p in params],
            v=[np.zeros_like(p.value) for p in params],
            learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update with bias correction. Pure: returns new arrays."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state length mismatch")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("parameter/gradient shape mismatch")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_params.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(m=new_m, v=new_v, t=t,
                          learning_rate=state.learning_rate,
                          beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return new_params, new_state

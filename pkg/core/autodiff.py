#!/usr/bin/env python3
"""
Autodiff Module

Array-level reverse-mode differentiation over a fixed operation set:
affine maps, tanh, pointwise arithmetic, slicing and reductions.

Every call builds its own Tape; tapes are never shared, so independent
gradient evaluations can run concurrently. Forward-mode derivatives with
respect to time are obtained by propagating tangents with ordinary tape
operations, which makes them differentiable in turn.
"""

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import NonFiniteError


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Node:
    """
    A value recorded on a Tape.

    Constants carry no index and never receive gradients.
    """

    # Make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, tape: 'Tape', value, index: Optional[int] = None):
        self.tape = tape
        self.value = value
        self.index = index

    @property
    def requires_grad(self) -> bool:
        return self.index is not None

    @property
    def shape(self) -> Tuple[int, ...]:
        return np.shape(self.value)

    def _lift(self, other) -> 'Node':
        if isinstance(other, Node):
            return other
        return self.tape.constant(other)

    # Arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = self._lift(other)
        a, b = self.value, other.value
        return self.tape.record('add', a + b, (
            (self, lambda g: _unbroadcast(g, np.shape(a))),
            (other, lambda g: _unbroadcast(g, np.shape(b))),
        ))

    def __radd__(self, other):
        return self._lift(other) + self

    def __sub__(self, other):
        other = self._lift(other)
        a, b = self.value, other.value
        return self.tape.record('sub', a - b, (
            (self, lambda g: _unbroadcast(g, np.shape(a))),
            (other, lambda g: _unbroadcast(-g, np.shape(b))),
        ))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        a, b = self.value, other.value
        return self.tape.record('mul', a * b, (
            (self, lambda g: _unbroadcast(g * b, np.shape(a))),
            (other, lambda g: _unbroadcast(g * a, np.shape(b))),
        ))

    def __rmul__(self, other):
        return self._lift(other) * self

    def __truediv__(self, other):
        other = self._lift(other)
        a, b = self.value, other.value
        return self.tape.record('div', a / b, (
            (self, lambda g: _unbroadcast(g / b, np.shape(a))),
            (other, lambda g: _unbroadcast(-g * a / (b * b), np.shape(b))),
        ))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __neg__(self):
        return self.tape.record('neg', -self.value, ((self, lambda g: -g),))

    def __matmul__(self, other):
        other = self._lift(other)
        a, b = self.value, other.value
        if np.ndim(a) != 2 or np.ndim(b) not in (1, 2):
            raise ValueError(f"matmul supports 2-D @ 1-D/2-D, got {np.shape(a)} @ {np.shape(b)}")
        if np.ndim(b) == 1:
            grad_a = lambda g: np.outer(g, b)
        else:
            grad_a = lambda g: g @ b.T
        return self.tape.record('matmul', a @ b, (
            (self, grad_a),
            (other, lambda g: a.T @ g),
        ))

    def __rmatmul__(self, other):
        return self._lift(other) @ self

    # Structure ------------------------------------------------------------

    def __getitem__(self, key):
        shape = np.shape(self.value)

        def grad(g):
            full = np.zeros(shape)
            np.add.at(full, key, g)
            return full

        return self.tape.record('getitem', self.value[key], ((self, grad),))

    def reshape(self, *shape):
        original = np.shape(self.value)
        return self.tape.record('reshape', np.reshape(self.value, shape),
                                ((self, lambda g: np.reshape(g, original)),))

    def sum(self, axis: Optional[int] = None):
        shape = np.shape(self.value)

        def grad(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, shape).copy()

        return self.tape.record('sum', np.sum(self.value, axis=axis), ((self, grad),))


class Tape:
    """
    Wengert list of recorded operations.

    Values are checked as they are recorded; a NaN or infinity raises
    NonFiniteError naming the operation and its tape position.
    """

    def __init__(self):
        self._parents: List[Tuple[Tuple[Node, Callable], ...]] = []
        self._ops: List[str] = []

    def __len__(self):
        return len(self._ops)

    def variable(self, value) -> Node:
        """A leaf that receives gradients."""
        value = np.array(value, dtype=float)
        self._check('variable', value)
        return self._append('variable', value, ())

    def constant(self, value) -> Node:
        return Node(self, np.asarray(value, dtype=float))

    def record(self, op: str, value, parents: Sequence[Tuple[Node, Callable]]) -> Node:
        """Record an operation; parents that need no gradient are dropped."""
        live = tuple((p, fn) for p, fn in parents if p.requires_grad)
        self._check(op, value)
        if not live:
            return Node(self, value)
        return self._append(op, value, live)

    def _append(self, op: str, value, parents) -> Node:
        node = Node(self, value, index=len(self._ops))
        self._ops.append(op)
        self._parents.append(parents)
        return node

    def _check(self, op: str, value):
        if not np.all(np.isfinite(value)):
            raise NonFiniteError("non-finite intermediate value",
                                 location=f"op '{op}' at tape position {len(self._ops)}")

    def gradient(self, output: Node, wrt: Node) -> np.ndarray:
        """
        Reverse accumulation of d(output)/d(wrt).

        Args:
            output: Scalar node
            wrt: Variable node

        Returns:
            Gradient with the shape of `wrt`
        """
        if np.ndim(output.value) != 0:
            raise ValueError(f"gradient needs a scalar output, got shape {output.shape}")
        if not (output.requires_grad and wrt.requires_grad):
            return np.zeros(np.shape(wrt.value))

        grads: List[Optional[np.ndarray]] = [None] * len(self._ops)
        grads[output.index] = np.ones(())
        for idx in range(output.index, wrt.index, -1):
            g = grads[idx]
            if g is None:
                continue
            for parent, fn in self._parents[idx]:
                contribution = fn(g)
                if grads[parent.index] is None:
                    grads[parent.index] = np.array(contribution, dtype=float)
                else:
                    grads[parent.index] = grads[parent.index] + contribution
            grads[idx] = None

        result = grads[wrt.index]
        if result is None:
            return np.zeros(np.shape(wrt.value))
        if not np.all(np.isfinite(result)):
            raise NonFiniteError("non-finite gradient", location="reverse sweep")
        return result


def tanh(x: Node) -> Node:
    y = np.tanh(x.value)
    return x.tape.record('tanh', y, ((x, lambda g: g * (1.0 - y * y)),))


def square(x: Node) -> Node:
    xv = x.value
    return x.tape.record('square', xv * xv, ((x, lambda g: 2.0 * g * xv),))


def apply_left(matrix, x: Node) -> Node:
    """
    Constant linear map applied from the left: matrix @ x.

    `matrix` may be a dense array or a scipy sparse matrix.
    """
    return x.tape.record('apply_left', matrix @ x.value,
                         ((x, lambda g: np.asarray(matrix.T @ g)),))


def value_and_grad(fn: Callable[[Node], Node], theta: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Evaluate a scalar function of a flat parameter vector and its gradient.

    Args:
        fn: Builds the computation from a variable node on a fresh tape
        theta: Parameter values

    Returns:
        Tuple of (value, gradient)
    """
    tape = Tape()
    var = tape.variable(theta)
    out = fn(var)
    if not isinstance(out, Node):
        return float(out), np.zeros_like(var.value)
    return float(out.value), tape.gradient(out, var)

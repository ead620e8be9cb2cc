"""Dense float64 matrices with reverse-mode automatic differentiation.

A small tape built on numpy arrays, providing exactly the operations the
diffusion graph convolution model needs: matrix products, exact-shape
elementwise arithmetic, pointwise nonlinearities, and the squared
Frobenius norm used as the reconstruction loss.

Operations accept either plain 2-D arrays or :class:`Tensor` nodes. If
no operand is a Tensor the result is a plain array, so the same model
code serves training (wrap the weights in Tensors, call
:func:`backward` on the loss) and inference (raw arrays in, raw arrays
out) without branching.

Every operation validates its result: producing a NaN or Inf raises
:class:`NonFiniteError` instead of letting bad values drift into the
optimizer. Matrix values are treated as immutable once wrapped; a tape
belongs to a single training step.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import DimensionError, GraphCycleError, NonFiniteError

Array = np.ndarray


def as_matrix(x) -> Array:
    """Validate ``x`` as a 2-D, C-contiguous, all-finite float64 matrix."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"matrix dimensions must be at least 1x1, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix contains NaN or Inf entries")
    return a


class Tensor:
    """One node of the differentiation tape.

    ``value`` is fixed at construction. ``grad`` reads as zeros until a
    backward pass reaches the node, so a parameter that never influenced
    the loss reports a zero gradient.
    """

    __slots__ = ("value", "_grad", "_parents", "_backward")

    def __init__(self, value, parents: tuple = (), backward: Callable | None = None):
        self.value = as_matrix(value)
        self._grad: Array | None = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def grad(self) -> Array:
        if self._grad is None:
            return np.zeros_like(self.value)
        return self._grad

    def zero_grad(self) -> None:
        self._grad = None

    def _accumulate(self, g: Array) -> None:
        if self._grad is None:
            self._grad = np.array(g, dtype=np.float64)
        else:
            self._grad += g

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return hadamard(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, tracked={self._parents != ()})"


def _value(x) -> Array:
    return x.value if isinstance(x, Tensor) else as_matrix(x)


def _finish(out: Array, pulls: Iterable[tuple[object, Callable[[Array], Array]]]):
    """Wrap ``out`` in a Tensor when any operand is one; else return the array.

    ``pulls`` pairs each operand with its pullback (output gradient to
    operand gradient). Only Tensor operands are recorded on the tape.
    """
    out = as_matrix(out)
    tracked = [(t, pb) for t, pb in pulls if isinstance(t, Tensor)]
    if not tracked:
        return out

    def backward(g: Array, _tracked=tracked) -> None:
        for t, pb in _tracked:
            t._accumulate(pb(g))

    return Tensor(out, parents=tuple(t for t, _ in tracked), backward=backward)


def matmul(a, b):
    """Matrix product ``a @ b``."""
    va, vb = _value(a), _value(b)
    if va.shape[1] != vb.shape[0]:
        raise DimensionError(f"matmul shapes {va.shape} and {vb.shape} do not chain")
    with np.errstate(over="ignore", invalid="ignore"):
        out = va @ vb
    return _finish(out, [(a, lambda g: g @ vb.T), (b, lambda g: va.T @ g)])


def _check_same_shape(va: Array, vb: Array, op: str) -> None:
    if va.shape != vb.shape:
        raise DimensionError(f"{op} requires equal shapes, got {va.shape} and {vb.shape}")


def add(a, b):
    va, vb = _value(a), _value(b)
    _check_same_shape(va, vb, "add")
    return _finish(va + vb, [(a, lambda g: g), (b, lambda g: g)])


def sub(a, b):
    va, vb = _value(a), _value(b)
    _check_same_shape(va, vb, "sub")
    return _finish(va - vb, [(a, lambda g: g), (b, lambda g: -g)])


def hadamard(a, b):
    va, vb = _value(a), _value(b)
    _check_same_shape(va, vb, "hadamard")
    with np.errstate(over="ignore", invalid="ignore"):
        out = va * vb
    return _finish(out, [(a, lambda g: g * vb), (b, lambda g: g * va)])


_ELEMENTWISE = {"add": add, "sub": sub, "hadamard": hadamard}


def elementwise(a, b, op: str):
    """Entrywise ``add``, ``sub`` or ``hadamard`` on equal-shape operands."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(a, b)


def _sigmoid(x: Array) -> Array:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activation(a, kind: str):
    """Pointwise nonlinearity: ``relu``, ``sigmoid`` or ``tanh``."""
    va = _value(a)
    if kind == "relu":
        out = np.maximum(va, 0.0)
        return _finish(out, [(a, lambda g: g * (va > 0.0))])
    if kind == "sigmoid":
        out = _sigmoid(va)
        return _finish(out, [(a, lambda g: g * out * (1.0 - out))])
    if kind == "tanh":
        out = np.tanh(va)
        return _finish(out, [(a, lambda g: g * (1.0 - out * out))])
    raise ValueError(f"unknown activation {kind!r}")


def relu(a):
    return activation(a, "relu")


def sigmoid(a):
    return activation(a, "sigmoid")


def tanh(a):
    return activation(a, "tanh")


def frobenius_sq(a):
    """Sum of squared entries, returned as a 1x1 matrix. Gradient is 2a."""
    va = _value(a)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.array([[float(np.sum(va * va))]])
    return _finish(out, [(a, lambda g: (2.0 * g[0, 0]) * va)])


def _topological(root: Tensor) -> list[Tensor]:
    """Children-last ordering of the tape below ``root``; detects cycles."""
    order: list[Tensor] = []
    state: dict[int, int] = {id(root): 0}  # 0 = on stack, 1 = done
    stack: list[tuple[Tensor, Iterable]] = [(root, iter(root._parents))]
    while stack:
        node, parents = stack[-1]
        pushed = False
        for p in parents:
            s = state.get(id(p))
            if s == 0:
                raise GraphCycleError("cycle detected in differentiation graph")
            if s is None:
                state[id(p)] = 0
                stack.append((p, iter(p._parents)))
                pushed = True
                break
        if not pushed:
            state[id(node)] = 1
            order.append(node)
            stack.pop()
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(node) into every Tensor reachable from ``loss``.

    ``loss`` must be a 1x1 node. Parameters are expected to start the
    step with cleared gradients (fresh Tensors or ``zero_grad``).
    """
    if not isinstance(loss, Tensor):
        raise TypeError("backward expects a Tensor loss node")
    if loss.shape != (1, 1):
        raise DimensionError(f"backward expects a 1x1 loss node, got shape {loss.shape}")
    order = _topological(loss)
    loss._accumulate(np.ones((1, 1)))
    for node in reversed(order):
        if node._backward is not None and node._grad is not None:
            node._backward(node._grad)

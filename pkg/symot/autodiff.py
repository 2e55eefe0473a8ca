"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Only the operations the flow, the kernels and the losses need are provided.
There is no broadcasting apart from multiplying by a Python scalar; bias
vectors are expanded with :func:`broadcast_rows`.
"""

from __future__ import annotations

import contextlib
import contextvars
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, GraphError, NumericError

_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar("grad_enabled", default=True)
_node_counter = itertools.count()

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording a graph. Safe to use from several threads."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@dataclass(eq=False)
class Node:
    index: int
    op: str
    parents: tuple["Tensor", ...]
    backward: BackwardFn


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_node")

    def __init__(self, data, requires_grad: bool = False):
        array = np.array(data, dtype=np.float64, order="C")
        _check_finite(array, "tensor")
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._node: Node | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def parameter(value) -> Tensor:
    return Tensor(value, requires_grad=True)


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


def _check_finite(array: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NumericError(f"non-finite value produced by {op}")


def _result(value: np.ndarray, op: str, parents: tuple[Tensor, ...], backward_fn: BackwardFn) -> Tensor:
    _check_finite(value, op)
    out = Tensor.__new__(Tensor)
    out.data = value
    out.grad = None
    track = _grad_enabled.get() and any(p.requires_grad for p in parents)
    out.requires_grad = track
    out._node = Node(next(_node_counter), op, parents, backward_fn) if track else None
    return out


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _matrix(t: Tensor, op: str) -> None:
    if t.ndim != 2:
        raise DimensionError(f"{op}: expected a matrix, got shape {t.shape}")


# -- elementwise ------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "add")
    return _result(a.data + b.data, "add", (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "sub")
    return _result(a.data - b.data, "sub", (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "mul")
    return _result(a.data * b.data, "mul", (a, b), lambda g: (g * b.data, g * a.data))


def neg(t: Tensor) -> Tensor:
    t = as_tensor(t)
    return _result(-t.data, "neg", (t,), lambda g: (-g,))


def scale(t: Tensor, c: float) -> Tensor:
    t = as_tensor(t)
    c = float(c)
    return _result(t.data * c, "scale", (t,), lambda g: (g * c,))


def tanh(t: Tensor) -> Tensor:
    t = as_tensor(t)
    out = np.tanh(t.data)
    return _result(out, "tanh", (t,), lambda g: (g * (1.0 - out * out),))


def exp(t: Tensor) -> Tensor:
    t = as_tensor(t)
    with np.errstate(over="ignore"):
        out = np.exp(t.data)
    return _result(out, "exp", (t,), lambda g: (g * out,))


def relu(t: Tensor) -> Tensor:
    t = as_tensor(t)
    mask = t.data > 0.0
    return _result(np.where(mask, t.data, 0.0), "relu", (t,), lambda g: (g * mask,))


_UNARY = {"neg": neg, "tanh": tanh, "exp": exp, "relu": relu}
_BINARY = {"add": add, "sub": sub, "mul": mul}


def elementwise(op: str, *args, c: float | None = None) -> Tensor:
    """Dispatch by name: add, sub, mul, neg, tanh, exp, relu, scale (needs ``c``)."""
    if op == "scale":
        if c is None or len(args) != 1:
            raise DimensionError("scale takes one tensor and the scalar c")
        return scale(args[0], c)
    if op in _UNARY:
        if len(args) != 1:
            raise DimensionError(f"{op} takes one tensor, got {len(args)}")
        return _UNARY[op](args[0])
    if op in _BINARY:
        if len(args) != 2:
            raise DimensionError(f"{op} takes two tensors, got {len(args)}")
        return _BINARY[op](*args)
    raise ValueError(f"unknown elementwise op '{op}'")


# -- reductions -------------------------------------------------------------

def _normalize_axis(t: Tensor, axis: int | None) -> int | None:
    if axis is None:
        return None
    if not -t.ndim <= axis < t.ndim:
        raise DimensionError(f"axis {axis} is invalid for shape {t.shape}")
    return axis % t.ndim


def reduce(op: str, t: Tensor, axis: int | None = None) -> Tensor:
    if op not in ("sum", "mean"):
        raise ValueError(f"unknown reduction '{op}'")
    t = as_tensor(t)
    axis = _normalize_axis(t, axis)
    count = t.size if axis is None else t.shape[axis]
    if count == 0:
        raise DimensionError(f"{op} over an empty axis")
    value = t.data.sum(axis=axis)
    factor = 1.0
    if op == "mean":
        factor = 1.0 / count
        value = value * factor
    shape = t.shape

    def backward_fn(g):
        if axis is None:
            return (np.full(shape, float(g) * factor),)
        return (np.broadcast_to(np.expand_dims(g * factor, axis), shape).copy(),)

    return _result(np.asarray(value, dtype=np.float64), op, (t,), backward_fn)


def sum_(t: Tensor, axis: int | None = None) -> Tensor:
    return reduce("sum", t, axis)


def mean(t: Tensor, axis: int | None = None) -> Tensor:
    return reduce("mean", t, axis)


# -- matrix ops -------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _matrix(a, "matmul")
    _matrix(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions {a.shape} x {b.shape} do not agree")
    return _result(a.data @ b.data, "matmul", (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(t: Tensor) -> Tensor:
    t = as_tensor(t)
    _matrix(t, "transpose")
    return _result(t.data.T.copy(), "transpose", (t,), lambda g: (g.T,))


def reshape(t: Tensor, shape: tuple[int, ...]) -> Tensor:
    t = as_tensor(t)
    original = t.shape
    try:
        value = t.data.reshape(shape).copy()
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {original} to {shape}") from exc
    return _result(value, "reshape", (t,), lambda g: (g.reshape(original),))


def broadcast_rows(v: Tensor, n: int) -> Tensor:
    """Stack the vector ``v`` into ``n`` identical rows."""
    v = as_tensor(v)
    if v.ndim != 1:
        raise DimensionError(f"broadcast_rows expects a vector, got shape {v.shape}")
    value = np.tile(v.data, (n, 1))
    return _result(value, "broadcast_rows", (v,), lambda g: (g.sum(axis=0),))


def take_columns(t: Tensor, index: Sequence[int]) -> Tensor:
    t = as_tensor(t)
    _matrix(t, "take_columns")
    idx = np.asarray(index, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= t.shape[1]):
        raise DimensionError(f"column index out of range for shape {t.shape}")
    shape = t.shape

    def backward_fn(g):
        out = np.zeros(shape)
        np.add.at(out, (slice(None), idx), g)
        return (out,)

    return _result(t.data[:, idx], "take_columns", (t,), backward_fn)


def concat_columns(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _matrix(a, "concat_columns")
    _matrix(b, "concat_columns")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat_columns: row counts {a.shape[0]} and {b.shape[0]} differ")
    split = a.shape[1]
    return _result(
        np.concatenate([a.data, b.data], axis=1),
        "concat_columns",
        (a, b),
        lambda g: (g[:, :split], g[:, split:]),
    )


def pairwise_sqdist(a: Tensor, b: Tensor) -> Tensor:
    """Entry (i, j) is ||a_i - b_j||^2, clamped at zero after the expansion."""
    a, b = as_tensor(a), as_tensor(b)
    _matrix(a, "pairwise_sqdist")
    _matrix(b, "pairwise_sqdist")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"pairwise_sqdist: feature dims {a.shape[1]} and {b.shape[1]} differ")
    sq_a = np.einsum("ij,ij->i", a.data, a.data)
    sq_b = np.einsum("ij,ij->i", b.data, b.data)
    value = sq_a[:, None] + sq_b[None, :] - 2.0 * (a.data @ b.data.T)
    np.maximum(value, 0.0, out=value)

    def backward_fn(g):
        grad_a = 2.0 * (g.sum(axis=1)[:, None] * a.data - g @ b.data)
        grad_b = 2.0 * (g.sum(axis=0)[:, None] * b.data - g.T @ a.data)
        return grad_a, grad_b

    return _result(value, "pairwise_sqdist", (a, b), backward_fn)


# -- graph ------------------------------------------------------------------

@dataclass
class Graph:
    """Non-leaf tensors reachable from a root, in creation order."""

    nodes: list[Tensor] = field(default_factory=list)

    @classmethod
    def from_root(cls, root: Tensor) -> "Graph":
        seen: set[int] = set()
        found: list[Tensor] = []
        stack = [root]
        while stack:
            t = stack.pop()
            if t._node is None or id(t) in seen:
                continue
            seen.add(id(t))
            found.append(t)
            stack.extend(p for p in t._node.parents if p.requires_grad)
        found.sort(key=lambda t: t._node.index)
        return cls(found)

    def parent_indices(self) -> list[list[int]]:
        position = {id(t): i for i, t in enumerate(self.nodes)}
        return [[position[id(p)] for p in t._node.parents if id(p) in position] for t in self.nodes]


def _accumulate_leaf(leaf: Tensor, g: np.ndarray) -> None:
    g = np.asarray(g, dtype=np.float64).reshape(leaf.shape)
    leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
    if root.size != 1:
        raise DimensionError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        raise GraphError("root does not depend on any tensor that requires grad")
    seed = np.ones(root.shape)
    if root.is_leaf:
        _accumulate_leaf(root, seed)
        return

    pending: dict[int, np.ndarray] = {id(root): seed}
    for t in reversed(Graph.from_root(root).nodes):
        g = pending.pop(id(t), None)
        if g is None:
            continue
        for parent, pg in zip(t._node.parents, t._node.backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.is_leaf:
                _accumulate_leaf(parent, pg)
            elif id(parent) in pending:
                pending[id(parent)] = pending[id(parent)] + pg
            else:
                pending[id(parent)] = pg

"""A small reverse-mode automatic differentiation tape over numpy arrays.

Every differentiable operation in the package is written against the
functions in this module. When none of the operands is a :class:`Var` the
functions fall through to plain numpy, so the same model code serves both
inference (no tape, no overhead) and training (recorded on a tape).

Shape rules are intentionally narrow: elementwise operations need equal
shapes, with two exceptions -- a Python/0-d scalar, and a bias vector of
length ``n`` added to every row of a ``(B, n)`` matrix.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError, DimensionError

__all__ = [
    "Tape",
    "Var",
    "Graph",
    "forward_eval",
    "backward",
    "value_and_grad",
    "make_node",
    "value_of",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "transpose",
    "total",
    "mean",
    "row_sums",
    "square",
    "exp",
    "scale_cols",
    "relu",
    "tanh",
    "sigmoid",
    "softplus",
    "leaky_relu",
    "activation",
    "solve",
    "hstack",
    "vstack",
    "take",
]

class _Node:
    __slots__ = ("parents", "vjp")

    def __init__(self, parents, vjp):
        self.parents = parents
        self.vjp = vjp


class Tape:
    """Records operations in execution order, which is a topological order."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.leaves: list[Var] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value) -> "Var":
        value = np.array(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise ContractError(f"leaf {len(self.leaves)} has non-finite entries")
        var = Var(self, len(self.nodes), value)
        self.nodes.append(_Node((), None))
        self.leaves.append(var)
        return var

    def backward(self, root: "Var") -> list[np.ndarray]:
        """Propagate adjoints from a scalar ``root`` back to every leaf.

        Returns the leaf gradients in creation order and also stores each one
        on ``leaf.grad``.
        """
        if not isinstance(root, Var) or root.tape is not self:
            raise ContractError("root is not recorded on this tape")
        if root.value.size != 1:
            raise ContractError(
                f"backward needs a scalar root, node {root.index} has shape {root.value.shape}"
            )
        adj: list = [None] * (root.index + 1)
        adj[root.index] = np.ones_like(root.value)
        for i in range(root.index, -1, -1):
            g = adj[i]
            node = self.nodes[i]
            if g is None or node.vjp is None:
                continue
            grads = node.vjp(g)
            for p, gp in zip(node.parents, grads):
                if p is None or gp is None:
                    continue
                adj[p] = gp if adj[p] is None else adj[p] + gp
        out = []
        for leaf in self.leaves:
            g = adj[leaf.index] if leaf.index <= root.index else None
            leaf.grad = np.zeros_like(leaf.value) if g is None else g
            out.append(leaf.grad)
        return out


class Var:
    """A value recorded on a :class:`Tape`."""

    __array_priority__ = 100.0
    __slots__ = ("tape", "index", "value", "grad")

    def __init__(self, tape: Tape, index: int, value: np.ndarray):
        self.tape = tape
        self.index = index
        self.value = value
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    @property
    def T(self):
        return transpose(self)

    def __repr__(self):
        return f"Var(node={self.index}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Var) or np.ndim(other) != 0:
            raise DimensionError("division is only defined by a scalar constant")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return take(self, key)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else x


def _tape_of(*args) -> Tape | None:
    tape = None
    for a in args:
        if isinstance(a, Var):
            if tape is None:
                tape = a.tape
            elif a.tape is not tape:
                raise ContractError("operands recorded on different tapes")
    return tape


def make_node(value: np.ndarray, parents: Sequence, vjp: Callable) -> "Var | np.ndarray":
    """Record ``value`` as the output of an operation on ``parents``.

    ``vjp`` maps the output adjoint to a tuple with one adjoint (or ``None``)
    per parent. Constant parents are dropped. If no parent lives on a tape the
    plain value is returned.
    """
    tape = _tape_of(*parents)
    if tape is None:
        return value
    idx = tuple(p.index if isinstance(p, Var) else None for p in parents)
    var = Var(tape, len(tape.nodes), value)
    tape.nodes.append(_Node(idx, vjp))
    return var


def _next_index(*args) -> int:
    tape = _tape_of(*args)
    return len(tape.nodes) if tape is not None else -1


def _check_elementwise(a, b, opname):
    sa, sb = np.shape(value_of(a)), np.shape(value_of(b))
    if sa == sb or len(sa) == 0 or len(sb) == 0:
        return
    # bias vector against matrix rows
    if len(sa) == 2 and len(sb) == 1 and sa[1] == sb[0]:
        return
    if len(sb) == 2 and len(sa) == 1 and sb[1] == sa[0]:
        return
    raise DimensionError(f"node {_next_index(a, b)}: {opname} of shapes {sa} and {sb}")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    if len(shape) == 0:
        return np.asarray(g.sum())
    # bias vector broadcast over rows
    return g.sum(axis=0)


def add(a, b):
    _check_elementwise(a, b, "add")
    va, vb = value_of(a), value_of(b)
    out = va + vb
    sa, sb = np.shape(va), np.shape(vb)
    return make_node(out, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    _check_elementwise(a, b, "sub")
    va, vb = value_of(a), value_of(b)
    out = va - vb
    sa, sb = np.shape(va), np.shape(vb)
    return make_node(out, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b):
    """Elementwise product; one side may be a scalar."""
    _check_elementwise(a, b, "mul")
    va, vb = value_of(a), value_of(b)
    out = va * vb
    sa, sb = np.shape(va), np.shape(vb)
    return make_node(
        out, (a, b), lambda g: (_unbroadcast(g * vb, sa), _unbroadcast(g * va, sb))
    )


def neg(a):
    return make_node(-value_of(a), (a,), lambda g: (-g,))


def matmul(a, b):
    va, vb = value_of(a), value_of(b)
    if va.ndim not in (1, 2) or vb.ndim not in (1, 2) or (va.ndim == 1 and vb.ndim == 1):
        raise DimensionError(
            f"node {_next_index(a, b)}: matmul needs a matrix operand, got {va.shape} @ {vb.shape}"
        )
    if va.shape[-1] != vb.shape[0]:
        raise DimensionError(f"node {_next_index(a, b)}: matmul of {va.shape} @ {vb.shape}")
    out = va @ vb

    def vjp(g):
        if va.ndim == 2 and vb.ndim == 2:
            return g @ vb.T, va.T @ g
        if vb.ndim == 1:  # (m,k) @ (k,)
            return np.outer(g, vb), va.T @ g
        return vb @ g, np.outer(va, g)  # (k,) @ (k,n)

    return make_node(out, (a, b), vjp)


def transpose(a):
    va = value_of(a)
    if va.ndim != 2:
        raise DimensionError(f"node {_next_index(a)}: transpose needs a matrix, got {va.shape}")
    return make_node(va.T, (a,), lambda g: (g.T,))


def total(a):
    """Sum of all entries, as a 0-d array."""
    va = value_of(a)
    return make_node(np.asarray(va.sum()), (a,), lambda g: (np.full(va.shape, float(g)),))


def mean(a):
    va = value_of(a)
    n = va.size
    return make_node(np.asarray(va.mean()), (a,), lambda g: (np.full(va.shape, float(g) / n),))


def row_sums(a):
    """Per-row sums of a ``(B, n)`` matrix, shape ``(B,)``."""
    va = value_of(a)
    if va.ndim != 2:
        raise DimensionError(f"node {_next_index(a)}: row_sums needs a matrix, got {va.shape}")
    return make_node(va.sum(axis=1), (a,), lambda g: (np.repeat(g[:, None], va.shape[1], axis=1),))


def square(a):
    va = value_of(a)
    return make_node(va * va, (a,), lambda g: (2.0 * g * va,))


def exp(a):
    out = np.exp(value_of(a))
    return make_node(out, (a,), lambda g: (g * out,))


def scale_cols(x, d):
    """Multiply column ``j`` of ``x`` (or entry ``j`` of a vector) by ``d[j]``."""
    vx, vd = value_of(x), value_of(d)
    if vd.ndim != 1 or vx.shape[-1] != vd.shape[0]:
        raise DimensionError(f"node {_next_index(x, d)}: scale_cols of {vx.shape} by {vd.shape}")
    out = vx * vd

    def vjp(g):
        gd = g * vx
        return g * vd, (gd.sum(axis=0) if gd.ndim == 2 else gd)

    return make_node(out, (x, d), vjp)


# activations ---------------------------------------------------------------

def relu(a):
    va = value_of(a)
    mask = va > 0  # derivative at exactly 0 is taken as 0
    return make_node(np.where(mask, va, 0.0), (a,), lambda g: (g * mask,))


def leaky_relu(a, slope: float = 0.01):
    va = value_of(a)
    d = np.where(va > 0, 1.0, slope)
    return make_node(va * d, (a,), lambda g: (g * d,))


def tanh(a):
    out = np.tanh(value_of(a))
    return make_node(out, (a,), lambda g: (g * (1.0 - out * out),))


def _sigmoid_np(v):
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def sigmoid(a):
    out = _sigmoid_np(value_of(a))
    return make_node(out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a):
    va = value_of(a)
    out = np.logaddexp(0.0, va)
    return make_node(out, (a,), lambda g: (g * _sigmoid_np(va),))


_ACTIVATIONS = {
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "softplus": softplus,
    "leaky_relu": leaky_relu,
}


def activation(name: str) -> Callable:
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(_ACTIVATIONS)}") from None


# linear algebra --------------------------------------------------------------

def solve(a, b):
    """Solve ``a @ x = b`` by LU with partial pivoting."""
    from .linalg import lu_factor, lu_solve

    va, vb = value_of(a), value_of(b)
    if va.ndim != 2 or va.shape[0] != va.shape[1] or vb.shape[0] != va.shape[0]:
        raise DimensionError(f"node {_next_index(a, b)}: solve of {va.shape} with rhs {vb.shape}")
    lu = lu_factor(va)
    x = lu_solve(lu, vb)

    def vjp(g):
        gb = lu_solve(lu, g, trans=True)
        ga = -np.outer(gb, x) if x.ndim == 1 else -gb @ x.T
        return ga, gb

    return make_node(x, (a, b), vjp)


# structure -------------------------------------------------------------------

def _stack(parts, axis):
    vals = [value_of(p) for p in parts]
    try:
        out = np.concatenate(vals, axis=axis)
    except ValueError as exc:
        raise DimensionError(f"node {_next_index(*parts)}: {exc}") from None
    bounds = np.cumsum([0] + [v.shape[axis] for v in vals])

    def vjp(g):
        if axis == 0:
            return tuple(g[bounds[i] : bounds[i + 1]] for i in range(len(vals)))
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(vals)))

    return make_node(out, tuple(parts), vjp)


def vstack(parts: Iterable):
    return _stack(list(parts), 0)


def hstack(parts: Iterable):
    parts = list(parts)
    if any(np.ndim(value_of(p)) != 2 for p in parts):
        raise DimensionError("hstack needs matrices")
    return _stack(parts, 1)


def take(a, key):
    """Basic (slice/integer) indexing with scatter-add adjoint."""
    va = value_of(a)
    out = va[key]

    def vjp(g):
        full = np.zeros_like(va)
        full[key] += g
        return (full,)

    return make_node(np.array(out), (a,), vjp)


# graph-level helpers ---------------------------------------------------------

class Graph:
    """A differentiable function with declared leaf shapes.

    ``fn`` is called with one tape variable per leaf and must build its result
    from the operations in this module. After :func:`forward_eval` the tape of
    the most recent run is kept on ``self.tape`` so :func:`backward` can use it.
    """

    def __init__(self, fn: Callable, shapes: Sequence[tuple] | None = None):
        self.fn = fn
        self.shapes = None if shapes is None else [tuple(s) for s in shapes]
        self.tape: Tape | None = None
        self.root: Var | None = None


def forward_eval(graph: Graph, leaves: Sequence) -> np.ndarray:
    if graph.shapes is not None:
        if len(leaves) != len(graph.shapes):
            raise DimensionError(f"expected {len(graph.shapes)} leaves, got {len(leaves)}")
        for i, (leaf, shape) in enumerate(zip(leaves, graph.shapes)):
            if np.shape(leaf) != shape:
                raise DimensionError(f"node {i}: leaf shape {np.shape(leaf)} != declared {shape}")
    tape = Tape()
    xs = [tape.leaf(v) for v in leaves]
    root = graph.fn(*xs)
    if not isinstance(root, Var):
        # output does not depend on any leaf
        root = make_node(np.asarray(root, dtype=np.float64), (xs[0],) if xs else (), lambda g: (None,))
    graph.tape, graph.root = tape, root
    return root.value


def backward(graph: Graph) -> list[np.ndarray]:
    if graph.tape is None:
        raise ContractError("forward_eval has not been run on this graph")
    return graph.tape.backward(graph.root)


def value_and_grad(fn: Callable, *arrays) -> tuple[float, list[np.ndarray]]:
    """Evaluate scalar ``fn(*arrays)`` and its gradient w.r.t. every argument."""
    g = Graph(fn)
    val = forward_eval(g, arrays)
    grads = backward(g)
    return float(np.asarray(val).reshape(())), grads

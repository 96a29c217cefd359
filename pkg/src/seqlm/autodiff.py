"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Graphs are built dynamically: every primitive returns a new :class:`Node`
holding its value and, for each input that needs a gradient, a backward
rule ``rule(out_grad, parent_grad)`` that accumulates into ``parent_grad``
in place. Only vectors, matrices and scalars (shape ``()``) are used.
"""

from __future__ import annotations

import threading
from collections import Counter
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DeterminismError, GraphIndexError, NumericError, ShapeError

__all__ = [
    "Node", "leaf", "constant", "matmul", "add", "add_n", "concat", "tanh", "sigmoid",
    "multiply", "row_lookup", "stack_columns", "log_softmax", "logsumexp", "pick", "scale", "getitem",
    "total", "add_column", "logsumexp_columns", "backward", "zero_grad", "grad_check",
    "grad_check_groups", "count_ops", "OpCounter",
]


class Node:
    __slots__ = ("value", "grad", "parents", "requires_grad", "op", "name", "pending")

    def __init__(self, value, parents=(), op="leaf", requires_grad=False, name=None):
        self.value = value
        self.parents = parents
        self.requires_grad = requires_grad
        self.op = op
        self.name = name
        self.grad = np.zeros_like(value) if (requires_grad and not parents) else None
        # (out_grad, vector) pairs of matrix-vector products, summed by backward()
        self.pending = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = self.name or self.op
        return f"Node({label}, shape={self.value.shape})"


def leaf(value, requires_grad=True, name=None) -> Node:
    """Wrap an array as a graph input. The array is shared, not copied."""
    value = np.asarray(value, dtype=np.float64)
    return Node(value, op="leaf", requires_grad=requires_grad, name=name)


def constant(value) -> Node:
    return Node(np.asarray(value, dtype=np.float64), op="const")


# -- instrumentation ---------------------------------------------------------

class OpCounter:
    """Tally of primitive calls and of the named leaves they read."""

    def __init__(self):
        self.ops: Counter[str] = Counter()
        self.params_read: Counter[str] = Counter()

    def total(self) -> int:
        return sum(self.ops.values())


_local = threading.local()


def _counters() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


@contextmanager
def count_ops():
    counter = OpCounter()
    stack = _counters()
    stack.append(counter)
    try:
        yield counter
    finally:
        stack.remove(counter)


def _make(value, op, inputs, rules) -> Node:
    stack = getattr(_local, "stack", None)
    if stack:
        for counter in stack:
            counter.ops[op] += 1
            for n in inputs:
                if n.name is not None:
                    counter.params_read[n.name] += 1
    if not np.isfinite(value).all():
        raise NumericError(f"non-finite value produced by {op}")
    parents = tuple((n, r) for n, r in zip(inputs, rules) if n.requires_grad)
    return Node(value, parents, op, bool(parents))


def _check_same(op, a, b):
    if a.value.shape != b.value.shape:
        raise ShapeError(f"{op}: shape mismatch {a.value.shape} vs {b.value.shape}")


# -- primitives --------------------------------------------------------------

def matmul(a: Node, b: Node) -> Node:
    """Matrix times vector, or matrix times matrix."""
    A, B = a.value, b.value
    if A.ndim != 2 or B.ndim not in (1, 2) or A.shape[1] != B.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {A.shape} and {B.shape}")
    if B.ndim == 1 and a.requires_grad and not a.parents:
        if a.pending is None:
            a.pending = []
        pending = a.pending

        def rule_a(g, ga):
            pending.append((g, B))
    elif B.ndim == 1:
        def rule_a(g, ga):
            ga += np.outer(g, B)
    else:
        def rule_a(g, ga):
            ga += g @ B.T

    def rule_b(g, gb):
        gb += A.T @ g

    return _make(A @ B, "matmul", (a, b), (rule_a, rule_b))


def _pass(g, gp):
    gp += g


def add(a: Node, b: Node) -> Node:
    _check_same("add", a, b)
    return _make(a.value + b.value, "add", (a, b), (_pass, _pass))


def add_n(nodes: Sequence[Node]) -> Node:
    """Sum of equally shaped nodes."""
    if not nodes:
        raise ShapeError("add_n: no inputs")
    shape = nodes[0].value.shape
    for n in nodes:
        if n.value.shape != shape:
            raise ShapeError(f"add_n: shape mismatch {shape} vs {n.value.shape}")
    value = nodes[0].value.copy()
    for n in nodes[1:]:
        value = value + n.value
    return _make(value, "add_n", tuple(nodes), (_pass,) * len(nodes))


def stack_columns(nodes: Sequence[Node]) -> Node:
    """Matrix whose j-th column is the j-th input vector."""
    if not nodes or any(n.value.ndim != 1 or n.value.shape != nodes[0].value.shape for n in nodes):
        raise ShapeError("stack_columns: expected equally sized vectors")
    rules = []
    for j in range(len(nodes)):
        def rule(g, gp, j=j):
            gp += g[:, j]
        rules.append(rule)
    return _make(np.stack([n.value for n in nodes], axis=1), "stack_columns", tuple(nodes), rules)


def concat(a: Node, b: Node) -> Node:
    if a.value.ndim != 1 or b.value.ndim != 1:
        raise ShapeError(f"concat: expected vectors, got {a.value.shape} and {b.value.shape}")
    k = a.value.shape[0]

    def rule_a(g, ga):
        ga += g[:k]

    def rule_b(g, gb):
        gb += g[k:]

    return _make(np.concatenate((a.value, b.value)), "concat", (a, b), (rule_a, rule_b))


def tanh(a: Node) -> Node:
    out = np.tanh(a.value)

    def rule(g, ga):
        ga += g * (1.0 - out * out)

    return _make(out, "tanh", (a,), (rule,))


def sigmoid(a: Node) -> Node:
    x = a.value
    # split by sign so large |x| never overflows exp
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def rule(g, ga):
        ga += g * out * (1.0 - out)

    return _make(out, "sigmoid", (a,), (rule,))


def multiply(a: Node, b: Node) -> Node:
    _check_same("multiply", a, b)
    A, B = a.value, b.value

    def rule_a(g, ga):
        ga += g * B

    def rule_b(g, gb):
        gb += g * A

    return _make(A * B, "multiply", (a, b), (rule_a, rule_b))


def scale(a: Node, c: float) -> Node:
    c = float(c)

    def rule(g, ga):
        ga += c * g

    return _make(c * a.value, "scale", (a,), (rule,))


def row_lookup(E: Node, i: int) -> Node:
    if E.value.ndim != 2:
        raise ShapeError(f"row_lookup: expected a matrix, got {E.value.shape}")
    i = int(i)
    if not 0 <= i < E.value.shape[0]:
        raise GraphIndexError(f"row_lookup: row {i} out of range for {E.value.shape}")

    def rule(g, gE):
        gE[i] += g

    return _make(E.value[i].copy(), "row_lookup", (E,), (rule,))


def getitem(a: Node, key) -> Node:
    """Basic (slice / integer) indexing. Advanced indexing is not supported."""
    try:
        out = a.value[key]
    except IndexError as exc:
        raise GraphIndexError(f"getitem: {exc}") from None
    if isinstance(key, (list, np.ndarray)) or (
            isinstance(key, tuple) and any(isinstance(k, (list, np.ndarray)) for k in key)):
        raise GraphIndexError("getitem: advanced indexing not supported")

    def rule(g, ga):
        ga[key] += g

    return _make(np.array(out, dtype=np.float64), "getitem", (a,), (rule,))


def pick(v: Node, k: int) -> Node:
    """Scalar entry ``v[k]`` of a vector."""
    if v.value.ndim != 1:
        raise ShapeError(f"pick: expected a vector, got {v.value.shape}")
    k = int(k)
    if not 0 <= k < v.value.shape[0]:
        raise GraphIndexError(f"pick: index {k} out of range for length {v.value.shape[0]}")

    def rule(g, gv):
        gv[k] += g

    return _make(np.array(v.value[k]), "pick", (v,), (rule,))


def total(a: Node) -> Node:
    """Sum of all entries, as a scalar."""
    def rule(g, ga):
        ga += g

    return _make(np.array(a.value.sum()), "sum", (a,), (rule,))


def _lse(x, axis=None):
    m = x.max(axis=axis, keepdims=True)
    s = np.log(np.exp(x - m).sum(axis=axis, keepdims=True)) + m
    return s if axis is not None else s.reshape(())


def logsumexp(v: Node) -> Node:
    """Max-shifted log-sum-exp of a vector, as a scalar."""
    if v.value.ndim != 1 or v.value.size == 0:
        raise ShapeError(f"logsumexp: expected a non-empty vector, got {v.value.shape}")
    out = _lse(v.value)
    p = np.exp(v.value - out)

    def rule(g, gv):
        gv += g * p

    return _make(out, "logsumexp", (v,), (rule,))


def log_softmax(v: Node) -> Node:
    if v.value.ndim != 1 or v.value.size == 0:
        raise ShapeError(f"log_softmax: expected a non-empty vector, got {v.value.shape}")
    shifted = v.value - v.value.max()
    out = shifted - np.log(np.exp(shifted).sum())
    p = np.exp(out)

    def rule(g, gv):
        gv += g - p * g.sum()

    return _make(out, "log_softmax", (v,), (rule,))


def add_column(m: Node, v: Node) -> Node:
    """``m[i, j] + v[i]``: add a vector to every column of a matrix."""
    if m.value.ndim != 2 or v.value.ndim != 1 or m.value.shape[0] != v.value.shape[0]:
        raise ShapeError(f"add_column: incompatible shapes {m.value.shape} and {v.value.shape}")

    def rule_v(g, gv):
        gv += g.sum(axis=1)

    return _make(m.value + v.value[:, None], "add_column", (m, v), (_pass, rule_v))


def logsumexp_columns(m: Node) -> Node:
    """Log-sum-exp down each column of a matrix, giving one value per column."""
    if m.value.ndim != 2:
        raise ShapeError(f"logsumexp_columns: expected a matrix, got {m.value.shape}")
    out = _lse(m.value, axis=0)
    p = np.exp(m.value - out)
    out = out[0]

    def rule(g, gm):
        gm += p * g[None, :]

    return _make(out, "logsumexp_columns", (m,), (rule,))


# -- backward ----------------------------------------------------------------

def _topological(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Node) -> None:
    """Accumulate d(loss)/d(node) into ``grad`` of every reachable leaf.

    Leaf gradients are added to, never reset: calling this twice without
    :func:`zero_grad` doubles them. Intermediate gradients are rebuilt on
    every call.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.value.shape}")
    if not loss.requires_grad:
        return
    order = _topological(loss)
    for node in order:
        if node.parents:
            node.grad = np.zeros_like(node.value)
    loss.grad += 1.0
    for node in reversed(order):
        g = node.grad
        for parent, rule in node.parents:
            rule(g, parent.grad)
    for node in order:
        if node.pending:
            gs, xs = zip(*node.pending)
            node.grad += np.array(gs).T @ np.array(xs)
            node.pending = []


def zero_grad(nodes: Iterable[Node]) -> None:
    for n in nodes:
        if n.grad is not None:
            n.grad[...] = 0.0


# -- verification ------------------------------------------------------------

def _rel_err(a, n):
    return abs(a - n) / max(1e-8, abs(a) + abs(n))


def grad_check_groups(build: Callable[[], Node], params: Sequence[Node],
                      eps: float = 1e-5) -> dict[str, float]:
    """Max relative error between analytic and central-difference gradients,
    per parameter (keyed by node name, or position when unnamed)."""
    first = float(build().value)
    second = float(build().value)
    if first != second:
        raise DeterminismError(f"build() is not deterministic: {first!r} != {second!r}")

    zero_grad(params)
    backward(build())
    errors: dict[str, float] = {}
    for pos, p in enumerate(params):
        analytic = p.grad.copy()
        worst = 0.0
        for idx in np.ndindex(p.value.shape):
            orig = p.value[idx]
            p.value[idx] = orig + eps
            up = float(build().value)
            p.value[idx] = orig - eps
            down = float(build().value)
            p.value[idx] = orig
            worst = max(worst, _rel_err(float(analytic[idx]), (up - down) / (2 * eps)))
        key = p.name if p.name is not None else str(pos)
        errors[key] = max(errors.get(key, 0.0), worst)
    zero_grad(params)
    return errors


def grad_check(build: Callable[[], Node], params: Sequence[Node], eps: float = 1e-5) -> float:
    """Largest relative gradient error over every entry of ``params``."""
    errors = grad_check_groups(build, params, eps)
    return max(errors.values(), default=0.0)

"""Reverse-mode automatic differentiation over dense float64 matrices.

Everything is a 2-D matrix (scalars are 1x1).  Operations executed
inside a `with Tape():` block are recorded in creation order; backward()
walks that order in reverse, so two backward passes over identical
tapes produce bit-identical gradients.  A finite-difference harness and
the Adam optimizer live here as well.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError, TapeStateError

_STACK = threading.local()


class Tape:
    """Ordered record of operations forming a DAG that ends at a loss."""

    def __init__(self):
        self.nodes: list[Value] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_STACK, "stack", None)
        if stack is None:
            stack = _STACK.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _STACK.stack.pop()
        return False

    def _record(self, value: "Value") -> "Value":
        value.tape = self
        value.index = len(self.nodes)
        self.nodes.append(value)
        return value


def _active_tape() -> Tape:
    stack = getattr(_STACK, "stack", None)
    if not stack:
        raise TapeStateError("no active tape; wrap the computation in `with Tape():`")
    return stack[-1]


class Value:
    """A matrix on the computation graph, with a same-shape gradient slot."""

    __slots__ = ("data", "grad", "op", "parents", "backward_fn", "tape", "index")

    def __init__(self, data, op: str = "leaf", parents: tuple = ()):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2:
            raise ShapeError(f"Value({op})", arr.shape)
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"Value({op}): entries must be finite")
        self.data = arr
        self.grad = np.zeros_like(arr)
        self.op = op
        self.parents = parents
        self.backward_fn = None
        self.tape: Tape | None = None
        self.index = -1

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad[:] = 0.0

    def __repr__(self) -> str:
        return f"Value(op={self.op!r}, shape={self.data.shape})"


def _result(data: np.ndarray, op: str, parents: tuple, backward_fn) -> Value:
    out = Value.__new__(Value)
    out.data = data
    out.grad = np.zeros_like(data)
    out.op = op
    out.parents = parents
    out.backward_fn = backward_fn
    out.tape = None
    out.index = -1
    return _active_tape()._record(out)


def matmul(a: Value, b: Value) -> Value:
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    out_data = a.data @ b.data

    def backward_fn(g):
        a.grad += g @ b.data.T
        b.grad += a.data.T @ g

    return _result(out_data, "matmul", (a, b), backward_fn)


def add(a: Value, b: Value) -> Value:
    if a.shape != b.shape:
        raise ShapeError("add", a.shape, b.shape)
    out_data = a.data + b.data

    def backward_fn(g):
        a.grad += g
        b.grad += g

    return _result(out_data, "add", (a, b), backward_fn)


def elementwise_mul(a: Value, b: Value) -> Value:
    if a.shape != b.shape:
        raise ShapeError("elementwise_mul", a.shape, b.shape)
    out_data = a.data * b.data

    def backward_fn(g):
        a.grad += g * b.data
        b.grad += g * a.data

    return _result(out_data, "elementwise_mul", (a, b), backward_fn)


def scale(a: Value, k: float) -> Value:
    """Multiply by a plain scalar constant."""
    k = float(k)
    out_data = k * a.data

    def backward_fn(g):
        a.grad += k * g

    return _result(out_data, "scale", (a,), backward_fn)


def relu(a: Value) -> Value:
    # Subgradient at 0 is defined as 0.
    mask = a.data > 0.0
    out_data = np.where(mask, a.data, 0.0)

    def backward_fn(g):
        a.grad += g * mask

    return _result(out_data, "relu", (a,), backward_fn)


def sigmoid(a: Value) -> Value:
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def backward_fn(g):
        a.grad += g * out_data * (1.0 - out_data)

    return _result(out_data, "sigmoid", (a,), backward_fn)


def tanh(a: Value) -> Value:
    out_data = np.tanh(a.data)

    def backward_fn(g):
        a.grad += g * (1.0 - out_data * out_data)

    return _result(out_data, "tanh", (a,), backward_fn)


def log(a: Value) -> Value:
    if not np.all(a.data > 0.0):
        raise DomainError("log: all entries must be positive")
    out_data = np.log(a.data)

    def backward_fn(g):
        a.grad += g / a.data

    return _result(out_data, "log", (a,), backward_fn)


def transpose(a: Value) -> Value:
    out_data = a.data.T.copy()

    def backward_fn(g):
        a.grad += g.T

    return _result(out_data, "transpose", (a,), backward_fn)


def row_concat(*values: Value) -> Value:
    if not values:
        raise ShapeError("row_concat")
    cols = values[0].shape[1]
    for v in values[1:]:
        if v.shape[1] != cols:
            raise ShapeError("row_concat", values[0].shape, v.shape)
    out_data = np.vstack([v.data for v in values])
    offsets = np.cumsum([0] + [v.shape[0] for v in values])

    def backward_fn(g):
        for v, lo, hi in zip(values, offsets, offsets[1:]):
            v.grad += g[lo:hi]

    return _result(out_data, "row_concat", tuple(values), backward_fn)


def scalar_sum(a: Value) -> Value:
    out_data = np.array([[a.data.sum()]])

    def backward_fn(g):
        a.grad += g[0, 0]

    return _result(out_data, "scalar_sum", (a,), backward_fn)


def softmax_over_rows(a: Value) -> Value:
    # Per-row max subtraction for overflow safety.
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    out_data = ex / ex.sum(axis=1, keepdims=True)

    def backward_fn(g):
        inner = (g * out_data).sum(axis=1, keepdims=True)
        a.grad += out_data * (g - inner)

    return _result(out_data, "softmax_over_rows", (a,), backward_fn)


def diag_row_scale(weights: Value, a: Value) -> Value:
    """Scale row i of `a` by weights[i]; weights is an N x 1 column."""
    if weights.shape != (a.shape[0], 1):
        raise ShapeError("diag_row_scale", weights.shape, a.shape)
    out_data = weights.data * a.data

    def backward_fn(g):
        weights.grad += (g * a.data).sum(axis=1, keepdims=True)
        a.grad += g * weights.data

    return _result(out_data, "diag_row_scale", (weights, a), backward_fn)


def _check_indices(indices: np.ndarray, bound: int, op: str) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError(op, idx.shape)
    if idx.size and (idx.min() < 0 or idx.max() >= bound):
        raise DomainError(f"{op}: index out of range [0, {bound})")
    return idx


def row_gather(a: Value, rows) -> Value:
    """Select rows of `a` by index; duplicates allowed."""
    idx = _check_indices(rows, a.shape[0], "row_gather")
    out_data = a.data[idx].copy() if idx.size else np.zeros((0, a.shape[1]))

    def backward_fn(g):
        np.add.at(a.grad, idx, g)

    return _result(out_data, "row_gather", (a,), backward_fn)


def scatter_rows_add(base: Value, rows: Value, indices) -> Value:
    """Add row p of `rows` onto row indices[p] of `base`."""
    idx = _check_indices(indices, base.shape[0], "scatter_rows_add")
    if rows.shape != (idx.size, base.shape[1]):
        raise ShapeError("scatter_rows_add", rows.shape, (idx.size, base.shape[1]))
    out_data = base.data.copy()
    np.add.at(out_data, idx, rows.data)

    def backward_fn(g):
        base.grad += g
        rows.grad += g[idx]

    return _result(out_data, "scatter_rows_add", (base, rows), backward_fn)


def gather_entries(a: Value, rows, cols) -> Value:
    """Pick entries a[rows[p], cols[p]] as a P x 1 column."""
    ridx = _check_indices(rows, a.shape[0], "gather_entries")
    cidx = _check_indices(cols, a.shape[1], "gather_entries")
    if ridx.size != cidx.size:
        raise ShapeError("gather_entries", ridx.shape, cidx.shape)
    out_data = a.data[ridx, cidx].reshape(-1, 1)

    def backward_fn(g):
        np.add.at(a.grad, (ridx, cidx), g[:, 0])

    return _result(out_data, "gather_entries", (a,), backward_fn)


def backward(loss: Value) -> None:
    """Fill grads of everything the loss depends on.

    The loss must be a recorded 1x1 scalar; its own grad ends up at 1.
    Traversal is the tape's creation order reversed, which is a valid
    topological order by construction.
    """
    if loss.shape != (1, 1):
        raise ShapeError("backward", loss.shape)
    if loss.tape is None:
        loss.grad += 1.0
        return
    loss.grad += 1.0
    for node in reversed(loss.tape.nodes[: loss.index + 1]):
        if node.backward_fn is None or not node.grad.any():
            continue
        node.backward_fn(node.grad)


def finite_difference_check(f, params: list[Value], h: float = 1e-6) -> float:
    """Largest relative disagreement between analytic and central-difference grads.

    `f` must rebuild the same scalar loss on every call (a fresh tape is
    opened around each evaluation).  The relative error denominator is
    max(|analytic|, |numeric|, 1e-12) per entry.  Central differences
    assume smoothness: keep evaluation points away from relu kinks and
    other non-differentiable loci (generic random instances do).
    """
    if h <= 0:
        raise DomainError("finite_difference_check: h must be positive")

    def evaluate() -> float:
        with Tape():
            out = f()
        val = float(out.data[0, 0])
        if not math.isfinite(val):
            raise DomainError("finite_difference_check: non-finite evaluation")
        return val

    for p in params:
        p.zero_grad()
    with Tape():
        loss = f()
    if loss.shape != (1, 1):
        raise ShapeError("finite_difference_check", loss.shape)
    if not math.isfinite(float(loss.data[0, 0])):
        raise DomainError("finite_difference_check: non-finite evaluation")
    backward(loss)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for p, grads in zip(params, analytic):
        for idx in np.ndindex(*p.data.shape):
            original = p.data[idx]
            p.data[idx] = original + h
            f_plus = evaluate()
            p.data[idx] = original - h
            f_minus = evaluate()
            p.data[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(grads[idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            worst = max(worst, rel)
    return worst


@dataclass
class AdamState:
    """Adam moment accumulators for a fixed parameter list."""

    params: tuple[Value, ...]
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.params = tuple(self.params)
        if not self.first_moment:
            self.first_moment = [np.zeros_like(p.data) for p in self.params]
        if not self.second_moment:
            self.second_moment = [np.zeros_like(p.data) for p in self.params]


def adam_step(state: AdamState, params: list[Value] | None = None) -> None:
    """One bias-corrected Adam update; gradients are zeroed afterwards."""
    if params is not None and tuple(params) != state.params:
        raise DomainError("adam_step: params must be the list the state was built for")
    if all(not p.grad.any() for p in state.params):
        warnings.warn("adam_step: all gradients are zero; skipping update", stacklevel=2)
        return
    state.step_count += 1
    t = state.step_count
    bias1 = 1.0 - state.beta1 ** t
    bias2 = 1.0 - state.beta2 ** t
    for p, m, v in zip(state.params, state.first_moment, state.second_moment):
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        p.zero_grad()

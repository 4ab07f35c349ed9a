"""
Differentiable operations over ``Tensor``.

Only what the embedding -> gate -> MLP path needs. Every op checks shapes
up front and raises ``ShapeError`` / ``LookupIndexError`` before touching data.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from scipy.special import expit

from ..errors import DomainError, LookupIndexError, ShapeError
from .tensor import Array, BackwardRule, Tensor, make_result

# =============================================================================
# Stop-gradient pinning
# =============================================================================


@dataclass
class StopGradPins:
    """Values seen by stop_grad during a reference evaluation, replayed in order."""

    values: list[Array] = field(default_factory=list)
    mode: Literal["record", "replay"] = "record"
    cursor: int = 0


_PINS: ContextVar[StopGradPins | None] = ContextVar("stop_grad_pins", default=None)


@contextmanager
def pinned_stop_grads(
    pins: StopGradPins, mode: Literal["record", "replay"]
) -> Iterator[StopGradPins]:
    """Record or replay stop_grad outputs (finite differences of the stop-grad surrogate)."""
    pins.mode = mode
    pins.cursor = 0
    token = _PINS.set(pins)
    try:
        yield pins
    finally:
        _PINS.reset(token)


# =============================================================================
# Linear algebra and lookup
# =============================================================================


def matmul(a: Tensor, w: Tensor) -> Tensor:
    """B x m times m x n."""
    if a.data.ndim != 2 or w.data.ndim != 2 or a.shape[1] != w.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {w.shape}")
    a_data, w_data = a.data, w.data

    def rule(up: Array) -> tuple[Array, Array]:
        return up @ w_data.T, a_data.T @ up

    return make_result(a_data @ w_data, (a, w), rule)


def _check_indices(indices: Any, n_rows: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= n_rows):
        bad = int(idx[(idx < 0) | (idx >= n_rows)][0])
        raise LookupIndexError(
            f"index {bad} outside table with {n_rows} rows", {"index": bad, "rows": n_rows}
        )
    return idx


def gather_rows(table: Tensor, indices: Any) -> Tensor:
    """Embedding lookup; backward scatter-adds, so repeated indices accumulate."""
    if table.data.ndim != 2:
        raise ShapeError(f"gather_rows needs a V x d table, got {table.shape}")
    idx = _check_indices(indices, table.shape[0])
    shape, dtype = table.data.shape, table.data.dtype

    def rule(up: Array) -> tuple[Array]:
        g = np.zeros(shape, dtype=dtype)
        np.add.at(g, idx, up)
        return (g,)

    return make_result(table.data[idx], (table,), rule)


# =============================================================================
# Elementwise and structural
# =============================================================================


def _gate_layout(z_shape: tuple[int, ...], g_shape: tuple[int, ...]) -> str:
    if len(z_shape) != 2:
        raise ShapeError(f"broadcast_mul needs a B x d operand, got {z_shape}")
    b, d = z_shape
    if int(np.prod(g_shape)) == 1:
        return "scalar"
    if g_shape in ((d,), (1, d)):
        return "column"
    if g_shape == (b, d):
        return "full"
    raise ShapeError(f"gate of shape {g_shape} does not broadcast to {z_shape}")


def broadcast_mul(z: Tensor, g: Tensor) -> Tensor:
    """z (B x d) times g, where g is a scalar, a per-column vector, or B x d."""
    layout = _gate_layout(z.shape, g.shape)
    g_b = g.data.reshape(()) if layout == "scalar" else g.data.reshape(-1, z.shape[1])
    z_data, g_shape = z.data, g.shape

    def rule(up: Array) -> tuple[Array, Array]:
        dz = up * g_b
        prod = up * z_data
        if layout == "scalar":
            dg = prod.sum().reshape(g_shape)
        elif layout == "column":
            dg = prod.sum(axis=0).reshape(g_shape)
        else:
            dg = prod
        return dz, dg

    return make_result(z_data * g_b, (z, g), rule)


def stop_grad(x: Tensor) -> Tensor:
    """Forward identity; contributes no gradient to ``x`` or anything upstream."""
    pins = _PINS.get()
    data = x.data
    if pins is not None:
        if pins.mode == "record":
            pins.values.append(data.copy())
        else:
            data = pins.values[pins.cursor]
            pins.cursor += 1
    return Tensor(data, requires_grad=False)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")

    def rule(up: Array) -> tuple[Array, Array]:
        return up, up

    return make_result(a.data + b.data, (a, b), rule)


def one_minus(x: Tensor) -> Tensor:
    def rule(up: Array) -> tuple[Array]:
        return (-up,)

    return make_result(1 - x.data, (x,), rule)


def scale(x: Tensor, c: float) -> Tensor:
    def rule(up: Array) -> tuple[Array]:
        return (up * c,)

    return make_result(x.data * c, (x,), rule)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} into {shape}")
    src_shape = x.shape

    def rule(up: Array) -> tuple[Array]:
        return (up.reshape(src_shape),)

    return make_result(x.data.reshape(shape), (x,), rule)


def mean_all(x: Tensor) -> Tensor:
    n, shape, dtype = x.size, x.shape, x.dtype

    def rule(up: Array) -> tuple[Array]:
        return (np.full(shape, up / n, dtype=dtype),)

    return make_result(np.asarray(x.data.mean(), dtype=dtype), (x,), rule)


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)

    def rule(up: Array) -> tuple[Array]:
        return (up * s * (1 - s),)

    return make_result(s, (x,), rule)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def rule(up: Array) -> tuple[Array]:
        return (up * mask,)

    return make_result(np.where(mask, x.data, 0).astype(x.dtype), (x,), rule)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    if x.data.ndim != 2 or b.shape != (x.shape[1],):
        raise ShapeError(f"bias of shape {b.shape} does not match activations {x.shape}")

    def rule(up: Array) -> tuple[Array, Array]:
        return up, up.sum(axis=0)

    return make_result(x.data + b.data, (x, b), rule)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate B x d_i blocks along columns; backward splits by column ranges."""
    if not parts:
        raise ShapeError("concat_cols needs at least one block")
    rows = {p.shape[0] for p in parts if p.data.ndim == 2}
    if len(rows) != 1 or any(p.data.ndim != 2 for p in parts):
        raise ShapeError(f"concat_cols needs equal batch dimension, got {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def rule(up: Array) -> list[Array]:
        return [up[:, bounds[i] : bounds[i + 1]] for i in range(len(parts))]

    return make_result(np.concatenate([p.data for p in parts], axis=1), parts, rule)


def bce_mean(logits: Tensor, labels: Any) -> Tensor:
    """
    Mean binary cross-entropy from logits.

    Uses max(x, 0) - x*y + log1p(exp(-|x|)); never takes the log of a probability.
    """
    x = logits.data.reshape(-1)
    y = np.asarray(labels, dtype=logits.dtype).reshape(-1)
    n = x.size
    if n == 0:
        raise DomainError("bce_mean needs a non-empty batch")
    if y.size != n:
        raise ShapeError(f"{n} logits but {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("labels must be binary")
    per_row = np.maximum(x, 0) - x * y + np.log1p(np.exp(-np.abs(x)))
    src_shape = logits.shape

    def rule(up: Array) -> tuple[Array]:
        return (((expit(x) - y) * (up / n)).reshape(src_shape),)

    return make_result(np.asarray(per_row.mean(), dtype=logits.dtype), (logits,), rule)


def custom_op(
    inputs: Sequence[Tensor],
    data: Array,
    backward_rule: Callable[[Array], Sequence[Array | None]],
) -> Tensor:
    """Record a fused op whose backward rule is supplied in closed form."""
    rule: BackwardRule = backward_rule
    return make_result(data, inputs, rule)

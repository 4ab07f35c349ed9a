"""
Tensor and tape: eager, define-by-run reverse-mode recording.

Operations record onto the tape that is active in the current context
(``with Tape(): ...``). Outside a tape nothing is recorded, which is how
inference and finite-difference evaluations run.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Sequence
from contextvars import ContextVar, Token
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from ..errors import ContractError, TapeStateError

logger = logging.getLogger(__name__)

Array = npt.NDArray[Any]
BackwardRule = Callable[[Array], Sequence[Array | None]]

_NODE_IDS = itertools.count()
_ACTIVE_TAPE: ContextVar[Tape | None] = ContextVar("active_tape", default=None)


class Tensor:
    """Dense real array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "node_id", "is_leaf")

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        dtype: npt.DTypeLike | None = None,
    ) -> None:
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data: Array = arr
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self.node_id: int = next(_NODE_IDS)
        self.is_leaf = True

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


@dataclass(slots=True)
class TapeNode:
    """One recorded operation: its inputs, its output and how to push gradients back."""

    inputs: tuple[Tensor, ...]
    output: Tensor
    backward_rule: BackwardRule


class Tape:
    """
    Ordered record of operations for one training step.

    Recording order is a topological order, so replaying backward rules in
    reverse visits every node after all of its consumers.
    """

    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []
        self.consumed = False
        self._token: Token[Tape | None] | None = None

    def __enter__(self) -> Tape:
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def record(self, node: TapeNode) -> None:
        if self.consumed:
            raise TapeStateError("cannot record onto a tape that was already consumed by backward")
        self.nodes.append(node)


def current_tape() -> Tape | None:
    """Return the tape active in this context, if any."""
    return _ACTIVE_TAPE.get()


def make_result(data: Array, inputs: Sequence[Tensor], backward_rule: BackwardRule) -> Tensor:
    """Wrap an op result and record it when a tape is active and any input needs grad."""
    requires = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires)
    tape = _ACTIVE_TAPE.get()
    if requires and tape is not None:
        out.is_leaf = False
        tape.record(TapeNode(tuple(inputs), out, backward_rule))
    return out


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    """
    Populate ``.grad`` on every requires_grad leaf reachable from ``loss``.

    Gradients from multiple paths accumulate by addition. The tape is consumed.

    Raises:
        ContractError: If ``loss`` is not a scalar.
        TapeStateError: If no tape is active or the tape was already consumed.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    tape = tape if tape is not None else _ACTIVE_TAPE.get()
    if tape is None:
        raise TapeStateError("backward called without an active tape")
    if tape.consumed:
        raise TapeStateError("tape already consumed by a previous backward pass")

    pending: dict[int, Array] = {}

    def deposit(t: Tensor, g: Array) -> None:
        if not t.requires_grad:
            return
        if t.is_leaf:
            t.grad = g.copy() if t.grad is None else t.grad + g
        elif t.node_id in pending:
            pending[t.node_id] = pending[t.node_id] + g
        else:
            pending[t.node_id] = g

    deposit(loss, np.ones_like(loss.data))

    for node in reversed(tape.nodes):
        upstream = pending.pop(node.output.node_id, None)
        if upstream is None:
            continue
        for inp, g in zip(node.inputs, node.backward_rule(upstream), strict=True):
            if g is not None:
                deposit(inp, g)

    logger.debug(f"backward replayed {len(tape.nodes)} nodes")
    tape.nodes.clear()
    tape.consumed = True

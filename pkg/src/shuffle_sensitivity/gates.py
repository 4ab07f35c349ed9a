"""
Gate parameterization, gated mixing and the sparsity penalty.

A gate is g = sigmoid(tau * phi). Mixing follows
``z* = g * z + (1 - g) * stop_grad(z_shuffled)`` so the gate learns how much
the model loses when a unit's signal is replaced by its batch-shuffled copy.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.special import expit, logit

from .config import (
    DEFAULT_INIT_GATE,
    HARD_GATE_LOGIT,
    PRUNE_THRESHOLD,
    GranularityName,
)
from .diffcore import (
    Array,
    Tape,
    Tensor,
    add,
    backward,
    broadcast_mul,
    custom_op,
    gather_rows,
    one_minus,
    scale,
    sigmoid,
    stop_grad,
)
from .errors import ConfigurationError, ShapeError
from .schema import GateStats
from .structs import FieldSchema

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class GateSet:
    """
    Learnable gates at one granularity.

    field: one (F, 1) phi, a gate per field.
    dim: one (D / chunk, 1) phi, a gate per chunk of embedding columns.
    entry: one (V_i, d_i) phi per field, a gate per embedding entry.
    """

    granularity: GranularityName
    phi: list[Tensor]
    tau: float
    alpha: float
    chunk: int = 1
    warmup_steps: int = 0

    @property
    def total_gates(self) -> int:
        return sum(p.size for p in self.phi)

    def frozen_at(self, step: int) -> bool:
        """True while phi is held fixed by the warm-up window."""
        return step < self.warmup_steps

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"gate.phi.{i}", p) for i, p in enumerate(self.phi)]

    def copy(self) -> GateSet:
        return GateSet(
            granularity=self.granularity,
            phi=[Tensor(p.data.copy(), requires_grad=p.requires_grad) for p in self.phi],
            tau=self.tau,
            alpha=self.alpha,
            chunk=self.chunk,
            warmup_steps=self.warmup_steps,
        )


def column_units(schema: FieldSchema, chunk: int) -> np.ndarray:
    """Dimension-gate unit index of every concatenated embedding column."""
    for f in schema.fields:
        if f.emb_dim % chunk:
            raise ConfigurationError(
                f"chunk {chunk} does not divide emb_dim {f.emb_dim} of field {f.name!r}",
                {"chunk": chunk, "field": f.name, "emb_dim": f.emb_dim},
            )
    return np.arange(schema.total_dim) // chunk


def unit_labels(schema: FieldSchema, granularity: GranularityName, chunk: int = 1) -> list[str]:
    """Human-readable name of every field or dimension unit."""
    if granularity == "field":
        return schema.names
    if granularity == "dim":
        labels = []
        for f in schema.fields:
            labels.extend(f"{f.name}[{c}:{c + chunk}]" for c in range(0, f.emb_dim, chunk))
        return labels
    return []


def build_gate_set(
    schema: FieldSchema,
    granularity: GranularityName,
    *,
    tau: float,
    alpha: float,
    chunk: int = 1,
    warmup_steps: int = 0,
    init_gate: float = DEFAULT_INIT_GATE,
    dtype: npt.DTypeLike = np.float64,
) -> GateSet:
    """
    Create gates for ``schema`` with every g starting at ``init_gate``.

    Raises:
        ConfigurationError: For an unknown granularity, a bad chunk or a
            non-positive temperature.
    """
    if tau <= 0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    if alpha < 0:
        raise ConfigurationError(f"alpha must be nonnegative, got {alpha}")
    if not 0.0 < init_gate < 1.0:
        raise ConfigurationError(f"init_gate must lie in (0, 1), got {init_gate}")
    phi0 = float(logit(init_gate)) / tau

    if granularity == "field":
        shapes = [(schema.n_fields, 1)]
    elif granularity == "dim":
        n_units = int(column_units(schema, chunk).max()) + 1
        shapes = [(n_units, 1)]
    elif granularity == "entry":
        shapes = [(f.vocab_size, f.emb_dim) for f in schema.fields]
    else:
        raise ConfigurationError(f"unknown granularity {granularity!r}")

    phi = [Tensor(np.full(s, phi0, dtype=dtype), requires_grad=True) for s in shapes]
    gs = GateSet(granularity, phi, tau, alpha, chunk if granularity == "dim" else 1, warmup_steps)
    logger.debug(f"built {granularity} gates: {gs.total_gates} gates, phi0={phi0:.4f}")
    return gs


def gate_values(gs: GateSet) -> list[Tensor]:
    """g = sigmoid(tau * phi) for every phi tensor, differentiable w.r.t. phi."""
    return [sigmoid(scale(p, gs.tau)) for p in gs.phi]


def apply_gates(z: Tensor, z_shuffled: Tensor, g: Tensor) -> Tensor:
    """
    g * z + (1 - g) * stop_grad(z_shuffled).

    ``g`` is a scalar, a per-column vector or a full B x d matrix.
    """
    if z.shape != z_shuffled.shape:
        raise ShapeError(f"clean {z.shape} and shuffled {z_shuffled.shape} signals differ")
    noise = stop_grad(z_shuffled)
    return add(broadcast_mul(z, g), broadcast_mul(noise, one_minus(g)))


def entry_gate_lookup(phi: Tensor, indices: npt.ArrayLike, tau: float) -> Tensor:
    """Gather per-entry gates for a batch: sigmoid(tau * phi[indices])."""
    return sigmoid(scale(gather_rows(phi, indices), tau))


def sparsity_penalty(gs: GateSet) -> Tensor:
    """
    alpha * mean(g) over every gate in the set, as one fused node.

    Backward is the closed form alpha * tau * g * (1 - g) / |S| for every phi,
    whether or not the entry was looked up in the current batch.
    """
    total = gs.total_gates
    g_all = [expit(gs.tau * p.data) for p in gs.phi]
    value = gs.alpha * sum(float(g.sum()) for g in g_all) / total
    alpha, tau = gs.alpha, gs.tau

    def rule(up: Array) -> list[Array]:
        return [up * (alpha * tau / total) * g * (1 - g) for g in g_all]

    dtype = gs.phi[0].dtype
    return custom_op(gs.phi, np.asarray(value, dtype=dtype), rule)


def unit_gate_values(gs: GateSet) -> list[np.ndarray]:
    """
    Current gate values without recording.

    Field and dim gates come back as one flat vector; entry gates as one
    V_i x d_i matrix per field.
    """
    values = [expit(gs.tau * p.data) for p in gs.phi]
    if gs.granularity == "entry":
        return values
    return [values[0].reshape(-1)]


def _flat(values: GateSet | Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    if isinstance(values, GateSet):
        values = unit_gate_values(values)
    if isinstance(values, np.ndarray):
        return values.reshape(-1).astype(np.float64)
    return np.concatenate([np.asarray(v, dtype=np.float64).reshape(-1) for v in values])


def gate_stats(
    values: GateSet | Sequence[np.ndarray] | np.ndarray,
    thresholds: Sequence[float] = (PRUNE_THRESHOLD,),
) -> GateStats:
    """Mean, per-threshold fractions and the kept/pruned extremes around 0.5."""
    g = _flat(values)
    for t in thresholds:
        if not 0.0 < t < 1.0:
            raise ConfigurationError(f"threshold must lie in (0, 1), got {t}")
    kept = g[g >= PRUNE_THRESHOLD]
    pruned = g[g < PRUNE_THRESHOLD]
    return GateStats(
        mean=float(g.mean()),
        frac_below={f"{t:g}": float((g < t).mean()) for t in thresholds},
        frac_above={f"{t:g}": float((g > t).mean()) for t in thresholds},
        min_kept=float(kept.min()) if kept.size else None,
        max_pruned=float(pruned.max()) if pruned.size else None,
        count=int(g.size),
    )


def harden(gs: GateSet, keep: Sequence[np.ndarray] | None = None) -> GateSet:
    """
    Copy of ``gs`` whose gates are exactly 1 (kept) or 0 (pruned).

    ``keep`` holds one boolean array per phi tensor, matching its shape; None
    keeps everything.
    """
    out = gs.copy()
    logit_mag = HARD_GATE_LOGIT / gs.tau
    for i, p in enumerate(out.phi):
        mask = np.ones(p.shape, dtype=bool) if keep is None else np.asarray(keep[i], dtype=bool)
        if mask.shape != p.shape:
            mask = mask.reshape(p.shape)
        p.data = np.where(mask, logit_mag, -logit_mag).astype(p.dtype)
    return out


@dataclass(frozen=True, slots=True)
class DescentTrace:
    final_gate: float
    steps: int
    gates: tuple[float, ...]


def descend_analytic_objective(
    delta_j: float,
    alpha: float,
    *,
    tau: float = 5.0,
    lr: float = 1.0,
    steps: int = 5000,
    init_gate: float = DEFAULT_INIT_GATE,
    stop_below: float | None = None,
) -> DescentTrace:
    """
    Gradient descent on J(g) + alpha * g with J(g) = J(1) + delta_j * (1 - g).

    Runs through the same phi parameterization and autodiff path the model
    uses. The constant J(1) does not affect the gradient and is dropped.
    """
    phi = Tensor(np.full((1, 1), float(logit(init_gate)) / tau), requires_grad=True)
    history: list[float] = []
    taken = 0
    for taken in range(1, steps + 1):
        phi.zero_grad()
        with Tape():
            g = sigmoid(scale(phi, tau))
            objective = add(scale(one_minus(g), delta_j), scale(g, alpha))
            backward(objective)
        assert phi.grad is not None
        phi.data = phi.data - lr * phi.grad
        current = float(expit(tau * phi.data).item())
        history.append(current)
        if stop_below is not None and current < stop_below:
            break
    return DescentTrace(final_gate=history[-1], steps=taken, gates=tuple(history))

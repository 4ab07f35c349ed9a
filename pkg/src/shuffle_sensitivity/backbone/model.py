"""
Deep CTR backbone: per-field embeddings, concatenation, ReLU MLP, one logit.

Gates, when supplied, are mixed in between the embedding lookup and the MLP
by the granularity's mixer.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from ..config import DEFAULT_BATCH_SIZE, DEFAULT_HIDDEN
from ..data import Dataset, SplitName
from ..diffcore import Tensor, add_bias, concat_cols, gather_rows, matmul, relu
from ..errors import ConfigurationError, ContractError, ShapeError
from ..gates import GateSet
from ..metrics import eval_result
from ..schema import EvalResult
from ..structs import FieldSchema
from .mixers import get_mixer

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class BackboneParams:
    """
    Model parameters: embedding tables and MLP layers ending in width 1.

    ``entry_masks`` is set after entry-level pruning; masked entries stay zero.
    """

    schema: FieldSchema
    embeddings: list[Tensor]
    weights: list[Tensor]
    biases: list[Tensor]
    entry_masks: list[np.ndarray] | None = field(default=None)

    def __post_init__(self) -> None:
        if len(self.embeddings) != self.schema.n_fields:
            raise ConfigurationError(
                f"{len(self.embeddings)} embedding tables for {self.schema.n_fields} fields"
            )
        for spec, table in zip(self.schema.fields, self.embeddings, strict=True):
            if table.shape != (spec.vocab_size, spec.emb_dim):
                raise ConfigurationError(
                    f"table for {spec.name!r} has shape {table.shape}, "
                    f"schema says ({spec.vocab_size}, {spec.emb_dim})"
                )
        width = self.schema.total_dim
        for w, b in zip(self.weights, self.biases, strict=True):
            if w.shape[0] != width or b.shape != (w.shape[1],):
                raise ConfigurationError(f"layer {w.shape} does not chain from width {width}")
            width = w.shape[1]
        if width != 1:
            raise ConfigurationError(f"final layer width must be 1, got {width}")

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights[:-1])

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        named = [(f"emb.{i}", t) for i, t in enumerate(self.embeddings)]
        for i, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            named.extend([(f"mlp.{i}.w", w), (f"mlp.{i}.b", b)])
        return named

    def n_parameters(self) -> int:
        """Trainable values; masked-out embedding entries do not count."""
        total = sum(t.size for _, t in self.named_parameters())
        if self.entry_masks is not None:
            total -= sum(m.size - int(np.count_nonzero(m)) for m in self.entry_masks)
        return total

    def apply_masks(self) -> None:
        if self.entry_masks is None:
            return
        for table, mask in zip(self.embeddings, self.entry_masks, strict=True):
            table.data = np.where(mask, table.data, 0).astype(table.dtype)

    def copy(self) -> BackboneParams:
        def dup(t: Tensor) -> Tensor:
            return Tensor(t.data.copy(), requires_grad=t.requires_grad)

        return BackboneParams(
            schema=self.schema,
            embeddings=[dup(t) for t in self.embeddings],
            weights=[dup(t) for t in self.weights],
            biases=[dup(t) for t in self.biases],
            entry_masks=None if self.entry_masks is None else [m.copy() for m in self.entry_masks],
        )

    def zero_grad(self) -> None:
        for _, t in self.named_parameters():
            t.zero_grad()


def init_params(
    schema: FieldSchema,
    rng: np.random.Generator,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    dtype: npt.DTypeLike = np.float32,
) -> BackboneParams:
    """Fan-in uniform initialization; embeddings use 1/sqrt(d), biases start at zero."""
    embeddings = []
    for spec in schema.fields:
        bound = 1.0 / np.sqrt(spec.emb_dim)
        data = rng.uniform(-bound, bound, size=(spec.vocab_size, spec.emb_dim))
        embeddings.append(Tensor(data.astype(dtype), requires_grad=True))

    widths = [schema.total_dim, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:], strict=True):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
        weights.append(Tensor(w, requires_grad=True))
        biases.append(Tensor(np.zeros(fan_out, dtype=dtype), requires_grad=True))
    return BackboneParams(schema, embeddings, weights, biases)


def check_gates(params: BackboneParams, gates: GateSet) -> None:
    """Raise ConfigurationError when ``gates`` were built for a different schema."""
    schema = params.schema
    if gates.granularity == "field":
        expected = [(schema.n_fields, 1)]
    elif gates.granularity == "dim":
        if any(d % gates.chunk for d in schema.dims):
            raise ConfigurationError(f"chunk {gates.chunk} does not divide every field width")
        expected = [(schema.total_dim // gates.chunk, 1)]
    else:
        expected = [(f.vocab_size, f.emb_dim) for f in schema.fields]
    actual = [p.shape for p in gates.phi]
    if actual != expected:
        raise ConfigurationError(
            f"{gates.granularity} gates of shapes {actual} do not fit schema (expected {expected})",
            {"granularity": gates.granularity},
        )


def embed(params: BackboneParams, X: np.ndarray) -> list[Tensor]:
    """Clean per-field embeddings, one B x d_i block per field."""
    return [gather_rows(table, X[:, i]) for i, table in enumerate(params.embeddings)]


def mlp(params: BackboneParams, h: Tensor) -> Tensor:
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases, strict=True)):
        h = add_bias(matmul(h, w), b)
        if i < last:
            h = relu(h)
    return h


def forward(
    params: BackboneParams,
    X: np.ndarray,
    gates: GateSet | None = None,
    rng: np.random.Generator | None = None,
    *,
    shuffle: bool = True,
) -> Tensor:
    """
    Logits (B x 1) for integer inputs X (B x F).

    With gates, each unit's embedding is mixed with its batch-shuffled copy.
    ``shuffle=False`` drops the shuffled term and scales by g alone.
    """
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != params.schema.n_fields:
        raise ShapeError(f"X of shape {X.shape} does not match {params.schema.n_fields} fields")
    if gates is None:
        h = concat_cols(embed(params, X))
    else:
        check_gates(params, gates)
        if shuffle and rng is None:
            raise ContractError("a gated forward with shuffling needs an rng")
        h = get_mixer(gates.granularity).mix(params, X, gates, rng, shuffle)
    return mlp(params, h)


def predict(
    params: BackboneParams,
    X: np.ndarray,
    gates: GateSet | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Probabilities; a gated predict keeps the shuffle branch active."""
    return np.asarray(expit(forward(params, X, gates, rng).data.reshape(-1)), dtype=np.float64)


def predict_logits(
    params: BackboneParams,
    X: np.ndarray,
    gates: GateSet | None = None,
    rng: np.random.Generator | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    out = [
        forward(params, X[start : start + batch_size], gates, rng).data.reshape(-1)
        for start in range(0, X.shape[0], batch_size)
    ]
    return np.concatenate(out).astype(np.float64) if out else np.empty(0)


def evaluate(
    params: BackboneParams,
    ds: Dataset,
    split: SplitName,
    gates: GateSet | None = None,
    rng: np.random.Generator | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> EvalResult:
    """AUC and log-loss over one split, in row order, batched."""
    X, y = ds.rows(split)
    logits = predict_logits(params, X, gates, rng, batch_size)
    return eval_result(split, logits, y)

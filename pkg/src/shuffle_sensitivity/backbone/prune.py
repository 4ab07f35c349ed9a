"""
Physical pruning: rebuild the backbone without the units a decision drops.

Field and dimension pruning remove embedding columns and the matching rows of
the first MLP weight. Entry pruning keeps table shapes and zeroes pruned
entries under a mask.
"""

from __future__ import annotations

import logging

import numpy as np

from ..diffcore import Tensor
from ..errors import ConfigurationError
from ..schema import PruneDecision
from ..structs import FieldSchema, FieldSpec
from .model import BackboneParams

logger = logging.getLogger(__name__)


def check_fingerprint(decision: PruneDecision, schema: FieldSchema) -> None:
    actual = schema.fingerprint()
    if decision.schema_fingerprint != actual:
        raise ConfigurationError(
            f"decision was made for schema {decision.schema_fingerprint}, "
            f"model schema is {actual}",
            {"decision_fingerprint": decision.schema_fingerprint, "schema_fingerprint": actual},
        )


def entry_masks(decision: PruneDecision, schema: FieldSchema) -> list[np.ndarray]:
    """Boolean V_i x d_i keep masks from the flat kept-entry indices."""
    if decision.entry_keep is None or len(decision.entry_keep) != schema.n_fields:
        raise ConfigurationError("entry decision needs one kept-entry list per field")
    masks = []
    for spec, kept in zip(schema.fields, decision.entry_keep, strict=True):
        mask = np.zeros(spec.vocab_size * spec.emb_dim, dtype=bool)
        mask[np.asarray(kept, dtype=np.int64)] = True
        masks.append(mask.reshape(spec.vocab_size, spec.emb_dim))
    return masks


def keep_masks(decision: PruneDecision, schema: FieldSchema) -> list[np.ndarray]:
    """Keep masks shaped like the gate phi tensors of the decision's granularity."""
    if decision.granularity == "entry":
        return entry_masks(decision, schema)
    n_units = schema.n_fields if decision.granularity == "field" else schema.total_dim // decision.chunk
    mask = np.zeros((n_units, 1), dtype=bool)
    mask[decision.kept_units, 0] = True
    return [mask]


def _slice_first_layer(params: BackboneParams, rows: np.ndarray) -> list[Tensor]:
    w0 = params.weights[0]
    first = Tensor(w0.data[rows].copy(), requires_grad=True)
    rest = [Tensor(w.data.copy(), requires_grad=True) for w in params.weights[1:]]
    return [first, *rest]


def physical_prune(
    params: BackboneParams,
    decision: PruneDecision,
) -> tuple[BackboneParams, FieldSchema]:
    """
    Copy the retained weights into a smaller model.

    Raises:
        ConfigurationError: On an empty keep set or a decision made for
            another schema.
    """
    schema = params.schema
    check_fingerprint(decision, schema)
    biases = [Tensor(b.data.copy(), requires_grad=True) for b in params.biases]

    if decision.granularity == "entry":
        masks = entry_masks(decision, schema)
        if not any(m.any() for m in masks):
            raise ConfigurationError("entry decision keeps no entries")
        pruned = params.copy()
        pruned.entry_masks = masks
        pruned.apply_masks()
        kept = sum(int(m.sum()) for m in masks)
        logger.info(f"entry prune: {kept} of {sum(m.size for m in masks)} entries kept")
        return pruned, schema

    if decision.granularity == "field":
        kept_fields = set(decision.kept_fields)
        kept_columns = [
            list(range(f.emb_dim)) if i in kept_fields else []
            for i, f in enumerate(schema.fields)
        ]
    else:
        kept_columns = decision.kept_columns
    if len(kept_columns) != schema.n_fields:
        raise ConfigurationError(f"decision lists columns for {len(kept_columns)} of {schema.n_fields} fields")
    if not any(kept_columns):
        raise ConfigurationError("decision keeps no units")

    specs, tables, rows = [], [], []
    for (start, _), spec, table, cols in zip(
        schema.offsets, schema.fields, params.embeddings, kept_columns, strict=True
    ):
        if not cols:
            continue
        idx = np.asarray(sorted(cols), dtype=np.int64)
        specs.append(FieldSpec(spec.name, spec.vocab_size, idx.size))
        tables.append(Tensor(table.data[:, idx].copy(), requires_grad=True))
        rows.append(start + idx)

    new_schema = FieldSchema(tuple(specs))
    weights = _slice_first_layer(params, np.concatenate(rows))
    pruned = BackboneParams(new_schema, tables, weights, biases)
    logger.info(
        f"{decision.granularity} prune: D {schema.total_dim} -> {new_schema.total_dim}, "
        f"fields {schema.n_fields} -> {new_schema.n_fields}"
    )
    return pruned, new_schema

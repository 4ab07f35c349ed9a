from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

import numpy as np

from ..config import GranularityName
from ..diffcore import Tensor, broadcast_mul, concat_cols, gather_rows, reshape
from ..errors import ConfigurationError
from ..gates import GateSet, apply_gates, column_units, entry_gate_lookup, gate_values
from ..shuffle import ShuffleUnit, batch_shuffle, shuffle_indices

if TYPE_CHECKING:
    from .model import BackboneParams


# Base Class for the Strategy Pattern
class GateMixer(ABC):
    """Mixes clean embeddings with their shuffled copies at one granularity."""

    @abstractmethod
    def mix(
        self,
        params: BackboneParams,
        X: np.ndarray,
        gates: GateSet,
        rng: np.random.Generator | None,
        shuffle: bool,
    ) -> Tensor:
        """
        Build the gated MLP input.

        Args:
            params: Backbone parameters holding the embedding tables.
            X: Integer inputs, B x F.
            gates: Gates matching the granularity.
            rng: Source of the batch permutations (unused when ``shuffle`` is False).
            shuffle: False drops the shuffled term, leaving g * z.

        Returns:
            The B x D concatenated, gated embedding matrix.
        """


def _mix(z: Tensor, z_shuffled: Tensor | None, g: Tensor) -> Tensor:
    if z_shuffled is None:
        return broadcast_mul(z, g)
    return apply_gates(z, z_shuffled, g)


class FieldMixer(GateMixer):
    """One scalar gate per field; the shuffled copy re-looks-up permuted ids."""

    def mix(
        self,
        params: BackboneParams,
        X: np.ndarray,
        gates: GateSet,
        rng: np.random.Generator | None,
        shuffle: bool,
    ) -> Tensor:
        g_all = gate_values(gates)[0]
        parts = []
        for i, table in enumerate(params.embeddings):
            z = gather_rows(table, X[:, i])
            z_shuffled = None
            if shuffle:
                assert rng is not None
                permuted = shuffle_indices(X, i, rng)
                z_shuffled = Tensor(table.data[permuted[:, i]])
            parts.append(_mix(z, z_shuffled, gather_rows(g_all, [i])))
        return concat_cols(parts)


class DimensionMixer(GateMixer):
    """One gate per chunk of embedding columns; chunks never straddle fields."""

    def mix(
        self,
        params: BackboneParams,
        X: np.ndarray,
        gates: GateSet,
        rng: np.random.Generator | None,
        shuffle: bool,
    ) -> Tensor:
        schema = params.schema
        e = concat_cols([gather_rows(t, X[:, i]) for i, t in enumerate(params.embeddings)])
        units = column_units(schema, gates.chunk)
        g_cols = reshape(gather_rows(gate_values(gates)[0], units), (schema.total_dim,))
        e_shuffled = None
        if shuffle:
            assert rng is not None
            unit = ShuffleUnit("per_column_rows", tuple(schema.offsets), gates.chunk)
            e_shuffled = batch_shuffle(e, unit, rng)
        return _mix(e, e_shuffled, g_cols)


class EntryMixer(GateMixer):
    """One gate per embedding entry, looked up with the same ids as the embedding."""

    def mix(
        self,
        params: BackboneParams,
        X: np.ndarray,
        gates: GateSet,
        rng: np.random.Generator | None,
        shuffle: bool,
    ) -> Tensor:
        parts = []
        column_wise = ShuffleUnit("per_column_rows")
        for i, (table, phi) in enumerate(zip(params.embeddings, gates.phi, strict=True)):
            z = gather_rows(table, X[:, i])
            g = entry_gate_lookup(phi, X[:, i], gates.tau)
            z_shuffled = None
            if shuffle:
                assert rng is not None
                z_shuffled = batch_shuffle(z, column_wise, rng)
            parts.append(_mix(z, z_shuffled, g))
        return concat_cols(parts)


_MIXERS: dict[GranularityName, GateMixer] = {
    "field": FieldMixer(),
    "dim": DimensionMixer(),
    "entry": EntryMixer(),
}


def get_mixer(granularity: GranularityName) -> GateMixer:
    try:
        return _MIXERS[granularity]
    except KeyError:
        raise ConfigurationError(f"unknown granularity {granularity!r}")

"""
Batch-wise shuffling.

Each shuffle unit (a field's column span, or a chunk of columns) has its rows
permuted by its own permutation, drawn by sorting uniform keys. The result
keeps every unit's within-batch marginal and breaks its link to the label.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .diffcore import Array, Tensor
from .errors import ContractError, ShapeError

logger = logging.getLogger(__name__)

UnitKind = Literal["per_field_rows", "per_column_rows"]


@dataclass(frozen=True, slots=True)
class ShuffleUnit:
    """
    How the columns of a B x d matrix are grouped into independently shuffled units.

    per_field_rows: each ``column_ranges`` span moves as one block.
    per_column_rows: consecutive groups of ``chunk`` columns; each group fits inside
    one field when ``column_ranges`` is given.
    """

    kind: UnitKind
    column_ranges: tuple[tuple[int, int], ...] = ()
    chunk: int = 1

    def __post_init__(self) -> None:
        if self.chunk < 1:
            raise ShapeError(f"chunk must be positive, got {self.chunk}")
        cursor = 0
        for start, stop in self.column_ranges:
            if start != cursor or stop <= start:
                raise ShapeError(
                    f"column ranges must be contiguous and disjoint: {self.column_ranges}"
                )
            if self.chunk > 1 and (stop - start) % self.chunk:
                raise ShapeError(f"chunk {self.chunk} does not divide field width {stop - start}")
            cursor = stop
        if self.kind == "per_field_rows" and not self.column_ranges:
            raise ShapeError("per_field_rows needs column ranges")

    def spans(self, width: int) -> list[tuple[int, int]]:
        """Column spans of every unit for a matrix of the given width."""
        if self.column_ranges and self.column_ranges[-1][1] != width:
            raise ShapeError(
                f"shuffle unit covers {self.column_ranges[-1][1]} columns, input has {width}"
            )
        if self.kind == "per_field_rows":
            return list(self.column_ranges)
        if width % self.chunk:
            raise ShapeError(f"chunk {self.chunk} does not divide width {width}")
        return [(c, c + self.chunk) for c in range(0, width, self.chunk)]


def make_permutations(rng: np.random.Generator, units: int, batch: int) -> np.ndarray:
    """
    Draw ``units`` independent uniform permutations of range(batch).

    Uniform keys are argsorted per row, O(units * B log B).
    """
    if batch < 1:
        raise ContractError(f"batch must be >= 1, got {batch}")
    keys = rng.random((units, batch))
    return np.argsort(keys, axis=1, kind="stable")


def batch_shuffle(s: Tensor | Array, unit: ShuffleUnit, rng: np.random.Generator) -> Tensor:
    """
    Permute the rows of every unit independently.

    The output never carries a gradient path back to ``s``.
    """
    data = s.data if isinstance(s, Tensor) else np.asarray(s)
    if data.ndim != 2:
        raise ShapeError(f"batch_shuffle needs a B x d matrix, got shape {data.shape}")
    batch, width = data.shape
    spans = unit.spans(width)
    perms = make_permutations(rng, len(spans), batch)

    out = np.empty_like(data)
    for (start, stop), perm in zip(spans, perms, strict=True):
        out[:, start:stop] = data[perm, start:stop]
    return Tensor(out, requires_grad=False)


def shuffle_indices(X: np.ndarray, field: int, rng: np.random.Generator) -> np.ndarray:
    """Permute column ``field`` of an integer index matrix within the batch."""
    if X.ndim != 2:
        raise ShapeError(f"shuffle_indices needs a B x F matrix, got shape {X.shape}")
    if not 0 <= field < X.shape[1]:
        raise ContractError(f"field {field} out of range for {X.shape[1]} fields")
    perm = make_permutations(rng, 1, X.shape[0])[0]
    out = X.copy()
    out[:, field] = X[perm, field]
    return out

from __future__ import annotations

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from ..config import MIN_SPLIT_ROWS, SPLIT_RATIOS, STREAM_BATCHES
from ..errors import ConfigurationError, ContractError, PreconditionError
from ..structs import FieldSchema

logger = logging.getLogger(__name__)

SplitName = Literal["train", "val", "test"]
RoleKind = Literal["informative", "redundant", "noise", "spurious"]
SPLIT_NAMES: tuple[SplitName, ...] = ("train", "val", "test")


@dataclass(frozen=True, slots=True)
class FieldRole:
    """Ground-truth role of a field; ``source`` names the field a redundant one recodes."""

    kind: RoleKind
    source: int | None = None


@dataclass(frozen=True, slots=True)
class Dataset:
    """
    Integer-coded categorical rows with binary labels.

    Immutable after construction; every transformation returns a new instance.
    ``vocabularies`` holds the string -> id coding of CSV columns that were
    string-coded (None for integer-coded columns).
    """

    X: np.ndarray
    y: np.ndarray
    schema: FieldSchema
    roles: tuple[FieldRole, ...] | None = None
    splits: dict[SplitName, np.ndarray] | None = None
    vocabularies: tuple[dict[str, int] | None, ...] | None = None

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.X.shape[1] != self.schema.n_fields:
            raise ConfigurationError(
                f"X of shape {self.X.shape} does not match {self.schema.n_fields} fields"
            )
        if self.y.shape != (self.X.shape[0],):
            raise ConfigurationError(f"{self.X.shape[0]} rows but {self.y.size} labels")
        if self.y.size and not np.all((self.y == 0) | (self.y == 1)):
            raise ConfigurationError("labels must be binary")
        if self.X.size:
            vocab = np.asarray(self.schema.vocab_sizes)
            if self.X.min() < 0 or np.any(self.X.max(axis=0) >= vocab):
                raise ConfigurationError("X holds ids outside the per-field vocabulary")
        if self.roles is not None and len(self.roles) != self.schema.n_fields:
            raise ConfigurationError(f"{len(self.roles)} roles for {self.schema.n_fields} fields")

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])

    @property
    def n_fields(self) -> int:
        return self.schema.n_fields

    def split_indices(self, name: SplitName) -> np.ndarray:
        if self.splits is None:
            raise ContractError("dataset has no splits; call split() first")
        return self.splits[name]

    def rows(self, name: SplitName) -> tuple[np.ndarray, np.ndarray]:
        idx = self.split_indices(name)
        return self.X[idx], self.y[idx]

    def fields_with_role(self, kind: RoleKind) -> list[int]:
        if self.roles is None:
            return []
        return [i for i, r in enumerate(self.roles) if r.kind == kind]


def split(
    ds: Dataset,
    ratios: tuple[int, int, int] = SPLIT_RATIOS,
    seed: int = 0,
) -> Dataset:
    """Seeded shuffle of the row indices, then contiguous train/val/test cuts."""
    n = ds.n_rows
    if n < MIN_SPLIT_ROWS:
        raise PreconditionError(f"split needs at least {MIN_SPLIT_ROWS} rows, got {n}")
    if len(ratios) != 3 or min(ratios) < 0 or sum(ratios) <= 0:
        raise ConfigurationError(f"invalid split ratios {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    total = sum(ratios)
    cut_train = n * ratios[0] // total
    cut_val = n * (ratios[0] + ratios[1]) // total
    splits: dict[SplitName, np.ndarray] = {
        "train": np.sort(perm[:cut_train]),
        "val": np.sort(perm[cut_train:cut_val]),
        "test": np.sort(perm[cut_val:]),
    }
    logger.debug(f"split {n} rows into {[len(v) for v in splits.values()]}")
    return replace(ds, splits=splits)


def batches(
    ds: Dataset,
    split_name: SplitName,
    batch_size: int,
    seed: int,
    epoch: int,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """One epoch over a split in a (seed, epoch)-determined order; the last batch may be partial."""
    if batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {batch_size}")
    idx = ds.split_indices(split_name)
    order = idx[np.random.default_rng([seed, STREAM_BATCHES, epoch]).permutation(idx.size)]
    for start in range(0, order.size, batch_size):
        rows = order[start : start + batch_size]
        yield ds.X[rows], ds.y[rows]


def select_fields(ds: Dataset, fields: Sequence[int]) -> Dataset:
    """Project onto a subset of fields, keeping rows, labels and splits."""
    fields = list(fields)
    if not fields:
        raise ConfigurationError("select_fields needs at least one field")
    if any(not 0 <= f < ds.n_fields for f in fields):
        raise ConfigurationError(f"field indices {fields} out of range for {ds.n_fields} fields")
    roles = None
    if ds.roles is not None:
        position = {old: new for new, old in enumerate(fields)}
        roles = tuple(
            FieldRole(r.kind, position.get(r.source) if r.source is not None else None)
            for r in (ds.roles[f] for f in fields)
        )
    vocabularies = None if ds.vocabularies is None else tuple(ds.vocabularies[f] for f in fields)
    return Dataset(
        X=ds.X[:, fields],
        y=ds.y,
        schema=ds.schema.select(fields),
        roles=roles,
        splits=ds.splits,
        vocabularies=vocabularies,
    )

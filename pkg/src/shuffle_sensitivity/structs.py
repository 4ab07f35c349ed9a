from __future__ import annotations

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass(frozen=True, slots=True)
class FieldSpec:
    """One categorical field: its name, vocabulary size and embedding width."""

    name: str
    vocab_size: int
    emb_dim: int


@dataclass(frozen=True, slots=True)
class FieldSchema:
    """Ordered fields of the model input; D is the concatenated embedding width."""

    fields: tuple[FieldSpec, ...]

    def __post_init__(self) -> None:
        if not self.fields:
            raise ConfigurationError("schema needs at least one field")
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate field names in schema: {names}")
        for f in self.fields:
            if f.vocab_size < 1 or f.emb_dim < 1:
                raise ConfigurationError(
                    f"field {f.name!r} needs vocab_size >= 1 and emb_dim >= 1",
                    {"vocab_size": f.vocab_size, "emb_dim": f.emb_dim},
                )

    @classmethod
    def from_vocab(cls, names: Sequence[str], vocabs: Sequence[int], emb_dim: int) -> FieldSchema:
        if len(names) != len(vocabs):
            raise ConfigurationError(f"{len(names)} field names but {len(vocabs)} vocab sizes")
        return cls(tuple(FieldSpec(n, int(v), emb_dim) for n, v in zip(names, vocabs, strict=True)))

    @property
    def n_fields(self) -> int:
        return len(self.fields)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.fields]

    @property
    def vocab_sizes(self) -> list[int]:
        return [f.vocab_size for f in self.fields]

    @property
    def dims(self) -> list[int]:
        return [f.emb_dim for f in self.fields]

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> list[tuple[int, int]]:
        """Column span of each field inside the concatenated input."""
        spans = []
        start = 0
        for d in self.dims:
            spans.append((start, start + d))
            start += d
        return spans

    def select(self, indices: Sequence[int]) -> FieldSchema:
        return FieldSchema(tuple(self.fields[i] for i in indices))

    def with_emb_dim(self, emb_dim: int) -> FieldSchema:
        return FieldSchema(tuple(FieldSpec(f.name, f.vocab_size, emb_dim) for f in self.fields))

    def fingerprint(self) -> str:
        """Stable hash of field names, vocab sizes and dims."""
        canon = "|".join(f"{f.name}:{f.vocab_size}:{f.emb_dim}" for f in self.fields)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

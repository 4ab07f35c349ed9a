"""
Checkpoint container: an ``.npz`` archive holding every array plus one JSON
metadata record (schema, gate settings, optimizer state, PRNG state).

Arrays are stored as-is, so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from ..diffcore import Tensor
from ..errors import ParseError
from ..gates import GateSet
from ..structs import FieldSchema, FieldSpec
from .model import BackboneParams
from .optim import Adam

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 2
_META_KEY = "__meta__"


@dataclass(slots=True)
class Checkpoint:
    params: BackboneParams
    gates: GateSet | None
    adam: Adam | None
    rng: np.random.Generator | None
    extra: dict[str, Any]


def save_checkpoint(
    path: Path | str,
    params: BackboneParams,
    gates: GateSet | None = None,
    adam: Adam | None = None,
    rng: np.random.Generator | None = None,
    extra: dict[str, Any] | None = None,
) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, t in params.named_parameters():
        arrays[name] = t.data
    if params.entry_masks is not None:
        for i, m in enumerate(params.entry_masks):
            arrays[f"mask.{i}"] = m
    if gates is not None:
        for name, phi in gates.parameters():
            arrays[name] = phi.data
    if adam is not None:
        for name, m in adam.m.items():
            arrays[f"adam.m.{name}"] = m
        for name, v in adam.v.items():
            arrays[f"adam.v.{name}"] = v

    meta: dict[str, Any] = {
        "format": CHECKPOINT_FORMAT,
        "schema": [[f.name, f.vocab_size, f.emb_dim] for f in params.schema.fields],
        "schema_fingerprint": params.schema.fingerprint(),
        "n_layers": len(params.weights),
        "n_masks": 0 if params.entry_masks is None else len(params.entry_masks),
        "gates": None
        if gates is None
        else {
            "granularity": gates.granularity,
            "tau": gates.tau,
            "alpha": gates.alpha,
            "chunk": gates.chunk,
            "warmup_steps": gates.warmup_steps,
            "n_phi": len(gates.phi),
        },
        "adam": None
        if adam is None
        else {**adam.hyperparameters(), "t": adam.t, "counts": adam.counts, "names": sorted(adam.m)},
        "rng_state": None if rng is None else rng.bit_generator.state,
        "extra": extra or {},
    }
    arrays[_META_KEY] = np.asarray(json.dumps(meta, sort_keys=True))

    path = Path(path)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    logger.info(f"checkpoint written to {path} ({len(arrays) - 1} arrays)")


def _tensor(arrays: Any, key: str) -> Tensor:
    if key not in arrays:
        raise ParseError(f"checkpoint is missing array {key!r}")
    return Tensor(arrays[key], requires_grad=True)


def load_checkpoint(path: Path | str) -> Checkpoint:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        ParseError: If the file is not a checkpoint or misses an array.
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {k: archive[k] for k in archive.files}
    except (OSError, ValueError) as e:
        raise ParseError(f"cannot read checkpoint {path}: {e}", details={"path": str(path)})
    if _META_KEY not in arrays:
        raise ParseError(f"{path} has no checkpoint metadata")
    meta = json.loads(str(arrays[_META_KEY]))
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"unsupported checkpoint format {meta.get('format')!r}")

    schema = FieldSchema(tuple(FieldSpec(n, int(v), int(d)) for n, v, d in meta["schema"]))
    n_layers = int(meta["n_layers"])
    masks = None
    if meta["n_masks"]:
        masks = [arrays[f"mask.{i}"] for i in range(int(meta["n_masks"]))]
    params = BackboneParams(
        schema=schema,
        embeddings=[_tensor(arrays, f"emb.{i}") for i in range(schema.n_fields)],
        weights=[_tensor(arrays, f"mlp.{i}.w") for i in range(n_layers)],
        biases=[_tensor(arrays, f"mlp.{i}.b") for i in range(n_layers)],
        entry_masks=masks,
    )

    gates = None
    if meta["gates"] is not None:
        g = meta["gates"]
        gates = GateSet(
            granularity=g["granularity"],
            phi=[_tensor(arrays, f"gate.phi.{i}") for i in range(int(g["n_phi"]))],
            tau=float(g["tau"]),
            alpha=float(g["alpha"]),
            chunk=int(g["chunk"]),
            warmup_steps=int(g["warmup_steps"]),
        )

    adam = None
    if meta["adam"] is not None:
        a = meta["adam"]
        adam = Adam(
            lr=a["lr"],
            beta1=a["beta1"],
            beta2=a["beta2"],
            eps=a["eps"],
        )
        adam.t = int(a["t"])
        adam.counts = {n: int(a["counts"][n]) for n in a["names"]}
        adam.m = {n: arrays[f"adam.m.{n}"] for n in a["names"]}
        adam.v = {n: arrays[f"adam.v.{n}"] for n in a["names"]}

    rng = None
    if meta["rng_state"] is not None:
        rng = np.random.default_rng()
        rng.bit_generator.state = meta["rng_state"]

    logger.info(f"checkpoint loaded from {path} (schema {meta['schema_fingerprint']})")
    return Checkpoint(params=params, gates=gates, adam=adam, rng=rng, extra=meta["extra"])

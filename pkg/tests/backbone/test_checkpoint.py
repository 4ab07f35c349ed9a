from pathlib import Path

import numpy as np
import pytest

from shuffle_sensitivity.backbone import (
    Adam,
    BackboneParams,
    load_checkpoint,
    physical_prune,
    save_checkpoint,
    train_step,
)
from shuffle_sensitivity.errors import ParseError
from shuffle_sensitivity.gates import build_gate_set
from shuffle_sensitivity.schema import PruneDecision


def test_round_trip_is_bit_exact(
    tmp_path: Path,
    small_params: BackboneParams,
    small_batch: tuple[np.ndarray, np.ndarray],
) -> None:
    gates = build_gate_set(small_params.schema, "entry", tau=5.0, alpha=0.1, warmup_steps=1)
    adam = Adam(lr=0.01)
    rng = np.random.default_rng(4)
    for _ in range(2):
        train_step(small_params, adam, gates, small_batch, rng)

    path = tmp_path / "search.ckpt"
    save_checkpoint(path, small_params, gates, adam, rng, extra={"stage": "search", "steps": 2})
    ckpt = load_checkpoint(path)

    for (name, a), (_, b) in zip(small_params.named_parameters(), ckpt.params.named_parameters(), strict=True):
        assert a.dtype == b.dtype, name
        np.testing.assert_array_equal(a.data, b.data)
    assert ckpt.gates is not None
    assert ckpt.gates.granularity == "entry"
    assert ckpt.gates.warmup_steps == 1
    for a, b in zip(gates.phi, ckpt.gates.phi, strict=True):
        np.testing.assert_array_equal(a.data, b.data)

    assert ckpt.adam is not None
    assert ckpt.adam.t == 2
    # gates sat out the warm-up step
    assert ckpt.adam.counts == adam.counts
    assert ckpt.adam.counts["emb.0"] == 2
    assert ckpt.adam.counts["gate.phi.0"] == 1
    assert sorted(ckpt.adam.m) == sorted(adam.m)
    np.testing.assert_array_equal(ckpt.adam.v["gate.phi.2"], adam.v["gate.phi.2"])

    assert ckpt.rng is not None
    assert ckpt.rng.random() == rng.random()
    assert ckpt.extra == {"stage": "search", "steps": 2}


def test_params_only_checkpoint(tmp_path: Path, small_params: BackboneParams) -> None:
    path = tmp_path / "plain.ckpt"
    save_checkpoint(path, small_params)
    ckpt = load_checkpoint(path)
    assert ckpt.gates is None
    assert ckpt.adam is None
    assert ckpt.rng is None
    assert ckpt.params.hidden == (4,)


def test_entry_masks_survive(tmp_path: Path, small_params: BackboneParams) -> None:
    decision = PruneDecision(
        strategy="threshold",
        threshold=0.5,
        granularity="entry",
        schema_fingerprint=small_params.schema.fingerprint(),
        entry_keep=[[0], [1, 2], [3]],
        n_kept=4,
        n_total=30,
        fr=1.0,
        dr=4 / 30,
    )
    pruned, _ = physical_prune(small_params, decision)
    path = tmp_path / "retrain.ckpt"
    save_checkpoint(path, pruned)
    ckpt = load_checkpoint(path)
    assert ckpt.params.entry_masks is not None
    assert pruned.entry_masks is not None
    for a, b in zip(pruned.entry_masks, ckpt.params.entry_masks, strict=True):
        np.testing.assert_array_equal(a, b)


def test_unreadable_files(tmp_path: Path) -> None:
    garbage = tmp_path / "garbage.ckpt"
    garbage.write_bytes(b"not a checkpoint")
    with pytest.raises(ParseError):
        load_checkpoint(garbage)
    with pytest.raises(ParseError):
        load_checkpoint(tmp_path / "missing.ckpt")

    bare = tmp_path / "bare.npz"
    with bare.open("wb") as fh:
        np.savez(fh, x=np.zeros(2))
    with pytest.raises(ParseError, match="metadata"):
        load_checkpoint(bare)

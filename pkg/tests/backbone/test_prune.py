import numpy as np
import pytest

from shuffle_sensitivity.backbone import (
    BackboneParams,
    check_fingerprint,
    entry_masks,
    forward,
    init_params,
    keep_masks,
    physical_prune,
)
from shuffle_sensitivity.config import GranularityName
from shuffle_sensitivity.errors import ConfigurationError
from shuffle_sensitivity.schema import PruneDecision
from shuffle_sensitivity.structs import FieldSchema


def _decision(
    schema: FieldSchema,
    granularity: GranularityName = "field",
    fingerprint: str | None = None,
    **kw: object,
) -> PruneDecision:
    return PruneDecision(
        strategy="topk",
        k=1,
        granularity=granularity,
        schema_fingerprint=fingerprint or schema.fingerprint(),
        n_kept=1,
        n_total=1,
        fr=1.0,
        dr=1.0,
        **kw,
    )


def test_keep_all_is_bit_identical(
    small_params: BackboneParams,
    small_batch: tuple[np.ndarray, np.ndarray],
) -> None:
    decision = _decision(small_params.schema, kept_units=[0, 1, 2], kept_fields=[0, 1, 2])
    pruned, schema = physical_prune(small_params, decision)
    assert schema == small_params.schema
    X, _ = small_batch
    np.testing.assert_array_equal(forward(pruned, X).data, forward(small_params, X).data)


def test_field_prune_slices_the_first_layer() -> None:
    schema = FieldSchema.from_vocab(["a", "b", "c", "d"], [3, 3, 3, 3], emb_dim=8)
    params = init_params(schema, np.random.default_rng(0), hidden=(5,))
    pruned, new_schema = physical_prune(params, _decision(schema, kept_units=[0, 2], kept_fields=[0, 2]))

    assert new_schema.names == ["a", "c"]
    assert new_schema.total_dim == 16
    w0 = pruned.weights[0].data
    assert w0.shape == (16, 5)
    np.testing.assert_array_equal(w0[:8], params.weights[0].data[0:8])
    np.testing.assert_array_equal(w0[8:], params.weights[0].data[16:24])
    np.testing.assert_array_equal(pruned.embeddings[1].data, params.embeddings[2].data)
    np.testing.assert_array_equal(pruned.weights[1].data, params.weights[1].data)
    assert pruned.weights[0] is not params.weights[0]


def test_dim_prune_keeps_listed_columns(small_params: BackboneParams) -> None:
    decision = _decision(
        small_params.schema,
        "dim",
        kept_units=[1, 4],
        kept_fields=[0, 2],
        kept_columns=[[1], [], [0]],
    )
    pruned, new_schema = physical_prune(small_params, decision)
    assert new_schema.names == ["a", "c"]
    assert new_schema.dims == [1, 1]
    np.testing.assert_array_equal(pruned.embeddings[0].data[:, 0], small_params.embeddings[0].data[:, 1])
    np.testing.assert_array_equal(pruned.weights[0].data, small_params.weights[0].data[[1, 4]])


def test_prune_rejects_a_foreign_decision(small_params: BackboneParams) -> None:
    decision = _decision(small_params.schema, fingerprint="0123456789abcdef", kept_fields=[0])
    with pytest.raises(ConfigurationError) as exc:
        physical_prune(small_params, decision)
    assert "0123456789abcdef" in str(exc.value)
    with pytest.raises(ConfigurationError):
        check_fingerprint(decision, small_params.schema)


def test_prune_rejects_empty_keep_sets(small_params: BackboneParams) -> None:
    with pytest.raises(ConfigurationError):
        physical_prune(small_params, _decision(small_params.schema, kept_fields=[]))
    with pytest.raises(ConfigurationError):
        physical_prune(small_params, _decision(small_params.schema, "entry", entry_keep=[[], [], []]))


def test_entry_prune_masks_tables(small_params: BackboneParams) -> None:
    decision = _decision(small_params.schema, "entry", entry_keep=[[0, 1], [], [11]])
    masks = entry_masks(decision, small_params.schema)
    assert [m.shape for m in masks] == [(5, 2), (4, 2), (6, 2)]
    assert [int(m.sum()) for m in masks] == [2, 0, 1]
    assert masks[2][5, 1]

    pruned, schema = physical_prune(small_params, decision)
    assert schema == small_params.schema
    np.testing.assert_array_equal(pruned.embeddings[0].data[0], small_params.embeddings[0].data[0])
    assert not pruned.embeddings[0].data[1:].any()
    assert not pruned.embeddings[1].data.any()
    # the source model is untouched
    assert small_params.embeddings[1].data.any()


def test_keep_masks_follow_gate_shapes(small_schema: FieldSchema) -> None:
    field = keep_masks(_decision(small_schema, kept_units=[1]), small_schema)
    assert [m.shape for m in field] == [(3, 1)]
    assert field[0][:, 0].tolist() == [False, True, False]
    dim = keep_masks(_decision(small_schema, "dim", chunk=2, kept_units=[2]), small_schema)
    assert dim[0][:, 0].tolist() == [False, False, True]

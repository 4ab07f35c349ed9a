import numpy as np
import pytest

from shuffle_sensitivity.backbone import BackboneParams, init_params
from shuffle_sensitivity.data import Dataset, generate_synthetic, split
from shuffle_sensitivity.schema import SearchConfig, SyntheticSpec
from shuffle_sensitivity.structs import FieldSchema


@pytest.fixture
def small_schema() -> FieldSchema:
    """Three fields with uneven vocabularies and width 2."""
    return FieldSchema.from_vocab(["a", "b", "c"], [5, 4, 6], emb_dim=2)


@pytest.fixture
def small_params(small_schema: FieldSchema) -> BackboneParams:
    """float64 backbone for finite-difference checks."""
    return init_params(small_schema, np.random.default_rng(0), hidden=(4,), dtype=np.float64)


@pytest.fixture
def small_batch(small_schema: FieldSchema) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(1)
    X = np.column_stack([rng.integers(0, v, size=6) for v in small_schema.vocab_sizes])
    y = np.array([0, 1, 1, 0, 1, 0])
    return X, y


@pytest.fixture
def tiny_spec() -> SyntheticSpec:
    return SyntheticSpec(n_informative=2, n_redundant=1, n_noise=2, vocab=8, n_samples=1500, seed=3)


@pytest.fixture
def tiny_dataset(tiny_spec: SyntheticSpec) -> Dataset:
    """1500 rows, 5 fields, split 8/1/1."""
    return split(generate_synthetic(tiny_spec, emb_dim=4), seed=0)


@pytest.fixture
def fast_config() -> SearchConfig:
    """One short epoch on tiny_dataset: 10 steps, validation every 5."""
    return SearchConfig(
        epochs=1,
        retrain_epochs=1,
        batch_size=128,
        eval_every=5,
        emb_dim=4,
        hidden=(8,),
        lr=0.01,
    )

import logging

import numpy as np
import pytest
from scipy.special import expit
from scipy.stats import entropy
from scipy.stats.contingency import crosstab

from shuffle_sensitivity.data import (
    Dataset,
    calibrate_bias,
    generate_synthetic,
    inject_spurious_field,
    split,
)
from shuffle_sensitivity.errors import PreconditionError
from shuffle_sensitivity.schema import SyntheticSpec


def test_default_layout_and_roles() -> None:
    ds = generate_synthetic(SyntheticSpec(n_samples=2000, seed=0))
    assert ds.n_fields == 12
    assert ds.schema.names[:6] == ["inf_0", "inf_1", "inf_2", "inf_3", "inf_4", "red_0"]
    assert ds.fields_with_role("informative") == [0, 1, 2, 3, 4]
    assert ds.fields_with_role("redundant") == [5, 6]
    assert ds.fields_with_role("noise") == list(range(7, 12))
    assert ds.roles is not None
    assert ds.roles[6].source == 1
    assert ds.schema.vocab_sizes == [100] * 12


def test_redundant_field_is_a_bijective_recoding(tiny_spec: SyntheticSpec) -> None:
    ds = generate_synthetic(tiny_spec)
    red = ds.fields_with_role("redundant")[0]
    assert ds.roles is not None
    source = ds.roles[red].source
    assert source is not None
    pairs = set(zip(ds.X[:, source].tolist(), ds.X[:, red].tolist(), strict=True))
    sources = [s for s, _ in pairs]
    targets = [t for _, t in pairs]
    assert len(set(sources)) == len(pairs)
    assert len(set(targets)) == len(pairs)


def test_generation_is_seeded(tiny_spec: SyntheticSpec) -> None:
    a = generate_synthetic(tiny_spec)
    b = generate_synthetic(tiny_spec)
    c = generate_synthetic(tiny_spec.model_copy(update={"seed": 4}))
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    assert not np.array_equal(a.X, c.X)


def test_base_rate_is_calibrated() -> None:
    ds = generate_synthetic(SyntheticSpec(n_samples=20_000, seed=1))
    assert abs(ds.y.mean() - 0.5) < 0.02


def test_calibrate_bias_hits_target() -> None:
    raw = np.random.default_rng(0).normal(2.0, 1.0, size=5000)
    bias = calibrate_bias(raw, target=0.3)
    assert float(expit(raw + bias).mean()) == pytest.approx(0.3, abs=1e-6)


def _plug_in_mutual_information(x: np.ndarray, y: np.ndarray) -> float:
    """Bits, from the empirical joint distribution."""
    joint = crosstab(x, y).count.astype(np.float64)
    joint /= joint.sum()
    marginals = entropy(joint.sum(axis=1), base=2) + entropy(joint.sum(axis=0), base=2)
    return float(marginals - entropy(joint.ravel(), base=2))


def test_noise_fields_carry_no_label_information() -> None:
    ds = generate_synthetic(SyntheticSpec(n_samples=50_000, seed=2))
    for f in ds.fields_with_role("noise"):
        assert _plug_in_mutual_information(ds.X[:, f], ds.y) < 0.01
    informative = [_plug_in_mutual_information(ds.X[:, f], ds.y) for f in ds.fields_with_role("informative")]
    assert max(informative) > 0.01


def test_zero_effect_gives_label_noise() -> None:
    ds = generate_synthetic(
        SyntheticSpec(n_informative=2, n_redundant=0, n_noise=1, effect_scale=0.0, n_samples=4000)
    )
    for f in range(ds.n_fields):
        rates = [ds.y[ds.X[:, f] == v].mean() for v in range(0, 100, 20)]
        assert max(rates) - min(rates) < 0.35


def test_spurious_field_leaks_train_labels_only(tiny_dataset: Dataset) -> None:
    ds = inject_spurious_field(tiny_dataset, field=4, strength=0.9, seed=0)
    assert ds.schema.names[4] == "spurious_noise_1"
    assert ds.schema.vocab_sizes[4] == 2
    assert ds.fields_with_role("spurious") == [4]

    train_X, train_y = ds.rows("train")
    test_X, test_y = ds.rows("test")
    assert (train_X[:, 4] == train_y).mean() > 0.85
    assert abs((test_X[:, 4] == test_y).mean() - 0.5) < 0.15
    np.testing.assert_array_equal(ds.X[:, :4], tiny_dataset.X[:, :4])


def test_spurious_field_needs_splits(tiny_spec: SyntheticSpec) -> None:
    with pytest.raises(PreconditionError):
        inject_spurious_field(generate_synthetic(tiny_spec), field=0, strength=0.5, seed=0)


def test_off_target_base_rate_warns(caplog: pytest.LogCaptureFixture) -> None:
    spec = SyntheticSpec(n_informative=1, n_redundant=0, n_noise=0, vocab=2, n_samples=40, seed=0)
    with caplog.at_level(logging.WARNING):
        ds = generate_synthetic(spec)
    if abs(ds.y.mean() - 0.5) > 0.02:
        assert "base rate" in caplog.text
    assert split(ds, seed=0).split_indices("train").size == 32

import math

import numpy as np
import pytest

from shuffle_sensitivity.diffcore import Tensor
from shuffle_sensitivity.errors import ContractError, ShapeError
from shuffle_sensitivity.shuffle import (
    ShuffleUnit,
    batch_shuffle,
    make_permutations,
    shuffle_indices,
)

TWO_FIELDS = ShuffleUnit("per_field_rows", ((0, 2), (2, 4)))


def test_permutations_of_single_row_batch() -> None:
    perms = make_permutations(np.random.default_rng(0), 4, 1)
    np.testing.assert_array_equal(perms, np.zeros((4, 1), dtype=np.int64))


def test_permutations_are_seeded() -> None:
    a = make_permutations(np.random.default_rng(42), 3, 5)
    b = make_permutations(np.random.default_rng(42), 3, 5)
    np.testing.assert_array_equal(a, b)
    for row in a:
        assert sorted(row) == list(range(5))


def test_permutations_need_a_batch() -> None:
    with pytest.raises(ContractError):
        make_permutations(np.random.default_rng(0), 2, 0)


def test_single_row_batch_is_unchanged() -> None:
    s = np.array([[1.0, 2.0, 3.0, 4.0]])
    out = batch_shuffle(s, TWO_FIELDS, np.random.default_rng(0))
    np.testing.assert_array_equal(out.data, s)


def test_fields_move_by_their_recorded_permutations() -> None:
    s = np.arange(16, dtype=np.float64).reshape(4, 4)
    out = batch_shuffle(s, TWO_FIELDS, np.random.default_rng(7))
    perms = make_permutations(np.random.default_rng(7), 2, 4)
    np.testing.assert_array_equal(out.data[:, 0:2], s[perms[0], 0:2])
    np.testing.assert_array_equal(out.data[:, 2:4], s[perms[1], 2:4])


def test_per_column_units_preserve_each_column_multiset() -> None:
    rng = np.random.default_rng(3)
    s = rng.normal(size=(32, 6))
    out = batch_shuffle(s, ShuffleUnit("per_column_rows"), np.random.default_rng(11))
    np.testing.assert_array_equal(np.sort(out.data, axis=0), np.sort(s, axis=0))


def test_chunked_columns_move_together() -> None:
    s = np.repeat(np.arange(8, dtype=np.float64)[:, None], 4, axis=1)
    s[:, 2:] += 100.0
    unit = ShuffleUnit("per_column_rows", ((0, 4),), chunk=2)
    out = batch_shuffle(s, unit, np.random.default_rng(5)).data
    np.testing.assert_array_equal(out[:, 0], out[:, 1])
    np.testing.assert_array_equal(out[:, 2], out[:, 3])


def test_constant_column_is_unchanged() -> None:
    s = np.full((6, 1), 3.5)
    out = batch_shuffle(s, ShuffleUnit("per_column_rows"), np.random.default_rng(1))
    np.testing.assert_array_equal(out.data, s)


def test_single_column_replays_its_permutation() -> None:
    s = np.array([[5.0], [7.0], [9.0]])
    out = batch_shuffle(s, ShuffleUnit("per_column_rows"), np.random.default_rng(2))
    perm = make_permutations(np.random.default_rng(2), 1, 3)[0]
    np.testing.assert_array_equal(out.data[:, 0], s[perm, 0])


def test_shuffled_output_carries_no_gradient() -> None:
    s = Tensor(np.ones((4, 4)), requires_grad=True)
    out = batch_shuffle(s, TWO_FIELDS, np.random.default_rng(0))
    assert not out.requires_grad
    assert out.is_leaf


def test_unit_validation() -> None:
    with pytest.raises(ShapeError):
        ShuffleUnit("per_column_rows", chunk=0)
    with pytest.raises(ShapeError):
        ShuffleUnit("per_field_rows", ((0, 2), (3, 4)))
    with pytest.raises(ShapeError):
        ShuffleUnit("per_column_rows", ((0, 3),), chunk=2)
    with pytest.raises(ShapeError):
        batch_shuffle(np.ones((2, 5)), TWO_FIELDS, np.random.default_rng(0))


def test_shuffle_indices_touches_one_field() -> None:
    rng = np.random.default_rng(9)
    X = rng.integers(0, 50, size=(20, 3))
    out = shuffle_indices(X, 1, np.random.default_rng(4))
    np.testing.assert_array_equal(out[:, [0, 2]], X[:, [0, 2]])
    assert sorted(out[:, 1]) == sorted(X[:, 1])
    with pytest.raises(ContractError):
        shuffle_indices(X, 3, np.random.default_rng(4))


def test_shuffled_label_field_decorrelates() -> None:
    correlations = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, size=1024)
        X = np.column_stack([y, rng.integers(0, 5, size=1024)])
        shuffled = shuffle_indices(X, 0, rng)[:, 0]
        correlations.append(np.corrcoef(shuffled, y)[0, 1])
    assert abs(np.mean(correlations)) < 0.05


def test_units_draw_independent_permutations() -> None:
    draws = 1000
    collisions = 0
    for seed in range(draws):
        perms = make_permutations(np.random.default_rng(seed), 2, 8)
        collisions += int(np.array_equal(perms[0], perms[1]))
    p = 1.0 / math.factorial(8)
    assert abs(collisions / draws - p) <= 3 * math.sqrt(p * (1 - p) / draws)

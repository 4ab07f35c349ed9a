import numpy as np
import pytest
from scipy.special import expit

from shuffle_sensitivity.diffcore import Tape, Tensor, backward, grad_check, mean_all
from shuffle_sensitivity.errors import ConfigurationError, ShapeError
from shuffle_sensitivity.gates import (
    GateSet,
    apply_gates,
    build_gate_set,
    column_units,
    entry_gate_lookup,
    gate_stats,
    gate_values,
    harden,
    sparsity_penalty,
    unit_gate_values,
    unit_labels,
)
from shuffle_sensitivity.structs import FieldSchema


def _field_gates(phi: list[float], tau: float = 5.0, alpha: float = 0.1) -> GateSet:
    data = np.asarray(phi, dtype=np.float64).reshape(-1, 1)
    return GateSet("field", [Tensor(data, requires_grad=True)], tau=tau, alpha=alpha)


def test_zero_logit_gives_half_gate() -> None:
    for tau in (0.5, 5.0, 50.0):
        g = gate_values(_field_gates([0.0, 0.0], tau=tau))[0]
        np.testing.assert_array_equal(g.data, [[0.5], [0.5]])


def test_initial_logit_matches_initial_gate(small_schema: FieldSchema) -> None:
    gs = build_gate_set(small_schema, "field", tau=5.0, alpha=0.1, init_gate=0.99)
    phi = gs.phi[0].data
    assert phi.shape == (3, 1)
    assert phi[0, 0] == pytest.approx(0.9190, abs=1e-4)
    np.testing.assert_allclose(unit_gate_values(gs)[0], [0.99, 0.99, 0.99])


def test_gate_shapes_per_granularity(small_schema: FieldSchema) -> None:
    dim = build_gate_set(small_schema, "dim", tau=5.0, alpha=0.1, chunk=2)
    assert [p.shape for p in dim.phi] == [(3, 1)]
    entry = build_gate_set(small_schema, "entry", tau=5.0, alpha=0.1)
    assert [p.shape for p in entry.phi] == [(5, 2), (4, 2), (6, 2)]
    assert entry.total_gates == 30


def test_build_rejects_bad_settings(small_schema: FieldSchema) -> None:
    with pytest.raises(ConfigurationError):
        build_gate_set(small_schema, "field", tau=0.0, alpha=0.1)
    with pytest.raises(ConfigurationError):
        build_gate_set(small_schema, "dim", tau=5.0, alpha=0.1, chunk=3)
    with pytest.raises(ConfigurationError):
        build_gate_set(small_schema, "field", tau=5.0, alpha=0.1, init_gate=1.0)


def test_column_units_and_labels(small_schema: FieldSchema) -> None:
    np.testing.assert_array_equal(column_units(small_schema, 1), np.arange(6))
    np.testing.assert_array_equal(column_units(small_schema, 2), [0, 0, 1, 1, 2, 2])
    assert unit_labels(small_schema, "dim", 2) == ["a[0:2]", "b[0:2]", "c[0:2]"]
    assert unit_labels(small_schema, "field") == ["a", "b", "c"]


def test_mean_gate_gradient() -> None:
    gs = _field_gates([-0.1, 0.05, 0.2])
    assert grad_check(lambda: mean_all(gate_values(gs)[0]), gs.phi) < 1e-8


def test_apply_gates_open_gate_passes_signal() -> None:
    z = Tensor([[1.0, -2.0], [3.0, 0.5]])
    z_shuffled = Tensor([[3.0, 0.5], [1.0, -2.0]])
    out = apply_gates(z, z_shuffled, Tensor(1.0))
    np.testing.assert_array_equal(out.data, z.data)


def test_apply_gates_closed_gate_passes_only_noise() -> None:
    z = Tensor([[1.0, -2.0]], requires_grad=True)
    z_shuffled = Tensor([[7.0, 8.0]])
    with Tape():
        out = apply_gates(z, z_shuffled, Tensor(0.0))
        np.testing.assert_array_equal(out.data, z_shuffled.data)
        backward(mean_all(out))
    np.testing.assert_array_equal(z.grad, [[0.0, 0.0]])


def test_apply_gates_hand_example() -> None:
    z = Tensor([[4.0]], requires_grad=True)
    g = Tensor([[0.25]], requires_grad=True)
    with Tape():
        out = apply_gates(z, Tensor([[2.0]]), g)
        assert out.data[0, 0] == pytest.approx(2.5)
        backward(mean_all(out))
    assert g.grad[0, 0] == pytest.approx(2.0)
    assert z.grad[0, 0] == pytest.approx(0.25)


def test_apply_gates_shape_mismatch() -> None:
    with pytest.raises(ShapeError):
        apply_gates(Tensor(np.ones((2, 2))), Tensor(np.ones((2, 3))), Tensor(0.5))


def test_entry_lookup_values() -> None:
    phi = Tensor(np.zeros((3, 2)), requires_grad=True)
    np.testing.assert_array_equal(entry_gate_lookup(phi, [2, 0], 5.0).data, np.full((2, 2), 0.5))

    phi = Tensor(np.random.default_rng(0).normal(size=(3, 2)), requires_grad=True)
    looked_up = entry_gate_lookup(phi, [1, 1, 0], 5.0).data
    expected = expit(5.0 * phi.data)[[1, 1, 0]]
    np.testing.assert_allclose(looked_up, expected)


def test_entry_lookup_gradient_counts_rows() -> None:
    rng = np.random.default_rng(1)
    phi = Tensor(rng.normal(scale=0.3, size=(4, 2)), requires_grad=True)
    indices = [1, 1, 0, 3]
    assert grad_check(lambda: mean_all(entry_gate_lookup(phi, indices, 5.0)), [phi]) < 1e-6

    with Tape():
        backward(mean_all(entry_gate_lookup(phi, indices, 5.0)))
    g = expit(5.0 * phi.data)
    counts = np.array([1, 2, 0, 1])[:, None]
    np.testing.assert_allclose(phi.grad, counts * 5.0 * g * (1 - g) / 8)


def test_penalty_hand_example() -> None:
    schema = FieldSchema.from_vocab(["a", "b"], [3, 3], emb_dim=2)
    gs = build_gate_set(schema, "field", tau=5.0, alpha=0.1)
    hard = harden(gs, keep=[np.array([[True], [False]])])
    np.testing.assert_array_equal(unit_gate_values(hard)[0], [1.0, 0.0])
    assert sparsity_penalty(hard).item() == pytest.approx(0.05)


def test_penalty_without_alpha_is_zero() -> None:
    gs = _field_gates([0.3, -0.4], alpha=0.0)
    with Tape():
        penalty = sparsity_penalty(gs)
        assert penalty.item() == 0.0
        backward(penalty)
    np.testing.assert_array_equal(gs.phi[0].grad, np.zeros((2, 1)))


def test_penalty_gradient_matches_finite_differences(small_schema: FieldSchema) -> None:
    gs = build_gate_set(small_schema, "entry", tau=5.0, alpha=0.3, init_gate=0.6)
    rng = np.random.default_rng(2)
    for p in gs.phi:
        p.data = p.data + rng.normal(scale=0.1, size=p.shape)
    assert grad_check(lambda: sparsity_penalty(gs), gs.phi) < 1e-6


def test_gate_stats_examples() -> None:
    stats = gate_stats(np.full(4, 0.99))
    assert stats.mean == pytest.approx(0.99)
    assert stats.frac_below["0.5"] == 0.0
    assert stats.max_pruned is None

    stats = gate_stats(np.array([0.99, 0.001]), thresholds=(0.5, 0.1))
    assert stats.frac_below == {"0.5": 0.5, "0.1": 0.5}
    assert stats.min_kept == pytest.approx(0.99)
    assert stats.max_pruned == pytest.approx(0.001)
    assert stats.count == 2


def test_harden_keeps_everything_by_default(small_schema: FieldSchema) -> None:
    gs = build_gate_set(small_schema, "entry", tau=5.0, alpha=0.1)
    hard = harden(gs)
    for values in unit_gate_values(hard):
        assert np.all(values == 1.0)
    assert np.all(unit_gate_values(gs)[0] < 1.0)

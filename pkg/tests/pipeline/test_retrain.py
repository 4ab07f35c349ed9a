import pytest

from shuffle_sensitivity.data import Dataset
from shuffle_sensitivity.errors import ConfigurationError, PreconditionError
from shuffle_sensitivity.pipeline import (
    SearchRun,
    TopK,
    decide_prune,
    looked_up_pruned_share,
    run_retrain,
    search,
    stress_entry,
    train_plain,
    wysiwyg_gap,
)
from shuffle_sensitivity.schema import PruneDecision, SearchConfig


@pytest.fixture
def searched(tiny_dataset: Dataset, fast_config: SearchConfig) -> SearchRun:
    return search(fast_config, tiny_dataset)


def test_keep_all_retrain_equals_plain_training(
    tiny_dataset: Dataset,
    fast_config: SearchConfig,
    searched: SearchRun,
) -> None:
    decision = decide_prune(searched.report, TopK(5))
    retrained = run_retrain(fast_config, tiny_dataset, decision)
    plain = train_plain(fast_config, tiny_dataset, epochs=fast_config.retrain_epochs)
    assert retrained.val == plain.val
    assert retrained.test == plain.test
    assert retrained.schema_fingerprint == searched.report.schema_fingerprint


def test_pruned_retrain_uses_fewer_fields(
    tiny_dataset: Dataset,
    fast_config: SearchConfig,
    searched: SearchRun,
) -> None:
    decision = decide_prune(searched.report, TopK(2))
    fresh = run_retrain(fast_config, tiny_dataset, decision)
    warm = run_retrain(fast_config, tiny_dataset, decision, warm_start=True, search_params=searched.params)
    assert not fresh.warm_start
    assert warm.warm_start
    assert fresh.schema_fingerprint == warm.schema_fingerprint
    assert fresh.schema_fingerprint != searched.report.schema_fingerprint
    assert fresh.val.n == 150


def test_retrain_preconditions(
    tiny_dataset: Dataset,
    fast_config: SearchConfig,
    searched: SearchRun,
) -> None:
    decision = decide_prune(searched.report, TopK(3))
    with pytest.raises(PreconditionError):
        run_retrain(fast_config, tiny_dataset, decision, warm_start=True)

    stale = decision.model_copy(update={"schema_fingerprint": "0000000000000000"})
    with pytest.raises(ConfigurationError) as exc:
        run_retrain(fast_config, tiny_dataset, stale)
    assert "0000000000000000" in str(exc.value)
    assert searched.report.schema_fingerprint in str(exc.value)


def test_wysiwyg_gap(
    tiny_dataset: Dataset,
    fast_config: SearchConfig,
    searched: SearchRun,
) -> None:
    retrained = run_retrain(fast_config, tiny_dataset, decide_prune(searched.report, TopK(3)))
    gap = wysiwyg_gap(searched.report, retrained)
    assert searched.report.final_val_auc is not None
    assert gap == pytest.approx(abs(searched.report.final_val_auc - retrained.val.auc))
    with pytest.raises(PreconditionError):
        wysiwyg_gap(searched.report.model_copy(update={"final_val_auc": None}), retrained)


def test_full_entry_stress_equals_plain_training(tiny_dataset: Dataset, fast_config: SearchConfig) -> None:
    cfg = fast_config.model_copy(update={"granularity": "entry"})
    stressed = stress_entry(cfg, tiny_dataset, 1.0)
    plain = train_plain(cfg, tiny_dataset, epochs=cfg.retrain_epochs)
    assert stressed == plain.test


def test_stress_entry_preconditions(tiny_dataset: Dataset, fast_config: SearchConfig) -> None:
    with pytest.raises(PreconditionError):
        stress_entry(fast_config, tiny_dataset, 0.5)
    entry = fast_config.model_copy(update={"granularity": "entry"})
    with pytest.raises(PreconditionError):
        stress_entry(entry, tiny_dataset, 0.0)


def _entry_decision(entry_keep: list[list[int]]) -> PruneDecision:
    return PruneDecision(
        strategy="topk",
        k=1,
        granularity="entry",
        schema_fingerprint="feedfacecafebeef",
        entry_keep=entry_keep,
        n_kept=1,
        n_total=160,
        fr=1.0,
        dr=0.1,
    )


def test_looked_up_pruned_share(tiny_dataset: Dataset) -> None:
    all_entries = list(range(32))
    keep_half = list(range(16))
    decision = _entry_decision([[], all_entries, keep_half, all_entries, all_entries])
    assert looked_up_pruned_share(decision, tiny_dataset, 0, emb_dim=4) == 1.0
    assert looked_up_pruned_share(decision, tiny_dataset, 1, emb_dim=4) == 0.0
    assert looked_up_pruned_share(decision, tiny_dataset, 2, emb_dim=4) == 0.5

    field_decision = _entry_decision([]).model_copy(update={"granularity": "field", "entry_keep": None})
    with pytest.raises(PreconditionError):
        looked_up_pruned_share(field_decision, tiny_dataset, 0, emb_dim=4)


def test_parameter_count_shrinks_with_the_decision(
    tiny_dataset: Dataset,
    fast_config: SearchConfig,
    searched: SearchRun,
) -> None:
    plain = train_plain(fast_config, tiny_dataset, epochs=fast_config.retrain_epochs)
    # 5 tables of 8 x 4, then 20 -> 8 -> 1
    assert plain.params.n_parameters() == 160 + (20 * 8 + 8) + (8 + 1)

    keep_all = run_retrain(fast_config, tiny_dataset, decide_prune(searched.report, TopK(5)))
    assert keep_all.n_parameters == plain.params.n_parameters()

    two_fields = run_retrain(fast_config, tiny_dataset, decide_prune(searched.report, TopK(2)))
    assert two_fields.n_parameters == 64 + (8 * 8 + 8) + (8 + 1)

    half_of_first = _entry_decision([list(range(16)), *[list(range(32))] * 4]).model_copy(
        update={"schema_fingerprint": searched.report.schema_fingerprint}
    )
    entry = run_retrain(fast_config, tiny_dataset, half_of_first)
    assert entry.n_parameters == keep_all.n_parameters - 16

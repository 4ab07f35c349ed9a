"""
Retrain stage: physically prune, train the smaller gate-free model, and
compare it with what the gate-equipped model showed during search.
"""

from __future__ import annotations

import logging
import math
import time

import numpy as np

from ..backbone import BackboneParams, check_fingerprint, entry_masks, evaluate, physical_prune
from ..data import Dataset, SplitName, select_fields
from ..errors import PreconditionError
from ..gates import unit_gate_values
from ..schema import EvalResult, PruneDecision, RetrainReport, SearchConfig, SearchReport
from .decide import TopK, decide_prune
from .search import fit, fresh_params, model_schema, search

logger = logging.getLogger(__name__)


def run_retrain(
    cfg: SearchConfig,
    ds: Dataset,
    decision: PruneDecision,
    warm_start: bool = False,
    search_params: BackboneParams | None = None,
    epochs: int | None = None,
) -> RetrainReport:
    """
    Prune, then train without gates from fresh weights or from the retained ones.

    A keep-everything decision trained from scratch follows exactly the same
    trajectory as train_plain with the same seed.

    Raises:
        PreconditionError: If ``warm_start`` is set without search parameters.
        ConfigurationError: If the decision belongs to another schema.
    """
    started = time.perf_counter()
    schema = model_schema(cfg, ds)
    check_fingerprint(decision, schema)
    epochs = epochs if epochs is not None else cfg.retrain_epochs

    if warm_start:
        if search_params is None:
            raise PreconditionError("warm start needs the search-stage parameters")
        params, new_schema = physical_prune(search_params, decision)
    else:
        _, new_schema = physical_prune(fresh_params(cfg, schema), decision)
        params = fresh_params(cfg, new_schema)
        if decision.granularity == "entry":
            params.entry_masks = entry_masks(decision, schema)
            params.apply_masks()

    pruned_ds = ds if decision.granularity == "entry" else select_fields(ds, decision.kept_fields)
    steps, _ = fit(params, cfg, pruned_ds, epochs)

    report = RetrainReport(
        warm_start=warm_start,
        epochs=epochs,
        schema_fingerprint=new_schema.fingerprint(),
        n_parameters=params.n_parameters(),
        val=evaluate(params, pruned_ds, "val", batch_size=cfg.batch_size),
        test=evaluate(params, pruned_ds, "test", batch_size=cfg.batch_size),
        wall_time_s=time.perf_counter() - started,
    )
    logger.info(
        f"retrain ({'warm' if warm_start else 'fresh'}, {steps} steps, "
        f"{report.n_parameters} parameters): "
        f"val AUC {report.val.auc:.4f}, test AUC {report.test.auc:.4f}"
    )
    return report


def wysiwyg_gap(report: SearchReport, retrain: RetrainReport) -> float:
    """|gate-learning val AUC - pruned-retrained val AUC|."""
    if report.final_val_auc is None:
        raise PreconditionError("search report has no final validation AUC")
    return abs(report.final_val_auc - retrain.val.auc)


def stress_entry(cfg: SearchConfig, ds: Dataset, keep_fraction: float) -> EvalResult:
    """
    Entry-level search, keep the top ``keep_fraction`` of all entries, masked retrain.

    Returns the test-split evaluation of the masked model.
    """
    if cfg.granularity != "entry":
        raise PreconditionError(f"stress_entry needs entry granularity, got {cfg.granularity!r}")
    if not 0.0 < keep_fraction <= 1.0:
        raise PreconditionError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    run = search(cfg, ds)
    entry_gates = unit_gate_values(run.gates)
    total = sum(g.size for g in entry_gates)
    k = max(1, math.ceil(keep_fraction * total))
    decision = decide_prune(run.report, TopK(k), entry_gates=entry_gates)
    result = run_retrain(cfg, ds, decision, warm_start=False).test
    logger.info(f"entry stress test: kept {k}/{total} entries, test AUC {result.auc:.4f}")
    return result


def looked_up_pruned_share(
    decision: PruneDecision,
    ds: Dataset,
    field: int,
    emb_dim: int,
    split: SplitName = "train",
) -> float:
    """Share of a field's looked-up embedding entries that an entry decision prunes."""
    if decision.entry_keep is None:
        raise PreconditionError("looked_up_pruned_share needs an entry decision")
    X, _ = ds.rows(split)
    vocab = ds.schema.fields[field].vocab_size
    mask = np.zeros(vocab * emb_dim, dtype=bool)
    mask[np.asarray(decision.entry_keep[field], dtype=np.int64)] = True
    looked_up = mask.reshape(vocab, emb_dim)[np.unique(X[:, field])]
    return float(1.0 - looked_up.mean())

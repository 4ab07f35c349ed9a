"""
Search stage: train the backbone and the gates jointly, monitoring gates and
the gate-equipped validation AUC every ``eval_every`` steps.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..backbone import Adam, BackboneParams, evaluate, init_params, train_step
from ..config import PRUNE_THRESHOLD, STREAM_EVAL, STREAM_INIT, STREAM_SHUFFLE
from ..data import Dataset, batches
from ..errors import NumericError, PreconditionError
from ..gates import GateSet, build_gate_set, gate_stats, unit_gate_values, unit_labels
from ..metrics import importance_ranking, polarization_report
from ..schema import AucPoint, EvalResult, SearchConfig, SearchReport, TraceRow
from ..structs import FieldSchema

logger = logging.getLogger(__name__)

MODEL_DTYPE = np.float32


@dataclass(slots=True)
class SearchRun:
    """A finished (or aborted) search with the state needed to checkpoint it."""

    report: SearchReport
    params: BackboneParams
    gates: GateSet
    adam: Adam
    rng: np.random.Generator


@dataclass(slots=True)
class PlainRun:
    """A gate-free training run evaluated on val and test."""

    params: BackboneParams
    val: EvalResult
    test: EvalResult
    steps: int
    wall_time_s: float = 0.0
    losses: list[float] = field(default_factory=list)


def model_schema(cfg: SearchConfig, ds: Dataset) -> FieldSchema:
    return ds.schema.with_emb_dim(cfg.emb_dim)


def fresh_params(cfg: SearchConfig, schema: FieldSchema) -> BackboneParams:
    """Initial weights; every run with the same seed and schema starts identically."""
    return init_params(schema, np.random.default_rng([cfg.seed, STREAM_INIT]), cfg.hidden, MODEL_DTYPE)


def _require_splits(ds: Dataset) -> None:
    if ds.splits is None:
        raise PreconditionError("dataset must be split before training")


def fit(
    params: BackboneParams,
    cfg: SearchConfig,
    ds: Dataset,
    epochs: int,
) -> tuple[int, list[float]]:
    """Gate-free training of ``params`` in place; returns (steps, per-step losses)."""
    _require_splits(ds)
    adam = Adam(lr=cfg.lr)
    losses = []
    for epoch in range(epochs):
        for batch in batches(ds, "train", cfg.batch_size, cfg.seed, epoch):
            losses.append(train_step(params, adam, None, batch, None).task_loss)
        logger.debug(f"epoch {epoch + 1}/{epochs}: last loss {losses[-1]:.5f}")
    return adam.t, losses


def train_plain(cfg: SearchConfig, ds: Dataset, epochs: int | None = None) -> PlainRun:
    """Full model without any selection, the reference every pruned model is compared to."""
    started = time.perf_counter()
    params = fresh_params(cfg, model_schema(cfg, ds))
    steps, losses = fit(params, cfg, ds, epochs if epochs is not None else cfg.epochs)
    run = PlainRun(
        params=params,
        val=evaluate(params, ds, "val", batch_size=cfg.batch_size),
        test=evaluate(params, ds, "test", batch_size=cfg.batch_size),
        steps=steps,
        wall_time_s=time.perf_counter() - started,
        losses=losses,
    )
    logger.info(f"plain training: val AUC {run.val.auc:.4f}, test AUC {run.test.auc:.4f}")
    return run


class _Monitor:
    """Collects trace rows and the validation AUC curve during search."""

    def __init__(self, cfg: SearchConfig, ds: Dataset, params: BackboneParams, gates: GateSet):
        self.cfg = cfg
        self.ds = ds
        self.params = params
        self.gates = gates
        self.eval_rng = np.random.default_rng([cfg.seed, STREAM_EVAL])
        self.trace: list[TraceRow] = []
        self.curve: list[AucPoint] = []
        self.eval_passes = 0
        self.last_auc: float | None = None
        self.last_eval_step = -1

    def validate(self, step: int) -> float:
        result = evaluate(
            self.params, self.ds, "val", self.gates, self.eval_rng, self.cfg.batch_size
        )
        self.eval_passes += 1
        self.last_auc = result.auc
        self.last_eval_step = step
        return result.auc

    def record(self, step: int, with_eval: bool) -> None:
        val_auc = None
        if with_eval:
            val_auc = self.validate(step)
            self.curve.append(AucPoint(step=step, val_auc=val_auc))
        values = unit_gate_values(self.gates)
        stats = gate_stats(values)
        below = stats.frac_below[f"{PRUNE_THRESHOLD:g}"]
        self.trace.append(
            TraceRow(
                step=step,
                gate_id="summary",
                mean_g=stats.mean,
                frac_below_0_5=below,
                val_auc=val_auc,
            )
        )
        if self.gates.granularity != "entry":
            for unit, g in enumerate(values[0]):
                self.trace.append(
                    TraceRow(
                        step=step,
                        gate_id=str(unit),
                        g_value=float(g),
                        mean_g=stats.mean,
                        frac_below_0_5=below,
                        val_auc=val_auc,
                    )
                )
        if with_eval:
            logger.info(f"step {step}: mean gate {stats.mean:.4f}, val AUC {val_auc:.4f}")


def search(cfg: SearchConfig, ds: Dataset) -> SearchRun:
    """
    Joint training of backbone and gates.

    Deterministic given ``cfg.seed``. A non-finite loss ends the run early
    with a report whose status is "failed".
    """
    _require_splits(ds)
    started = time.perf_counter()
    schema = model_schema(cfg, ds)
    params = fresh_params(cfg, schema)
    gates = build_gate_set(
        schema,
        cfg.granularity,
        tau=cfg.tau,
        alpha=cfg.alpha,
        chunk=cfg.chunk,
        warmup_steps=cfg.warmup_steps,
        init_gate=cfg.init_gate,
        dtype=MODEL_DTYPE,
    )
    adam = Adam(lr=cfg.lr)
    shuffle_rng = np.random.default_rng([cfg.seed, STREAM_SHUFFLE])
    monitor = _Monitor(cfg, ds, params, gates)
    logger.info(
        f"search: {cfg.granularity} gates ({gates.total_gates}), alpha={cfg.alpha}, "
        f"tau={cfg.tau}, epochs={cfg.epochs}, seed={cfg.seed}"
    )

    step = 0
    failure = None
    monitor.record(0, with_eval=False)
    try:
        for epoch in range(cfg.epochs):
            for batch in batches(ds, "train", cfg.batch_size, cfg.seed, epoch):
                train_step(params, adam, gates, batch, shuffle_rng, step)
                step += 1
                if step % cfg.eval_every == 0:
                    monitor.record(step, with_eval=True)
            if step % cfg.eval_every:
                monitor.record(step, with_eval=False)
            logger.info(f"epoch {epoch + 1}/{cfg.epochs} done at step {step}")
    except NumericError as e:
        failure = str(e)
        logger.error(f"search aborted at step {step}: {e}")

    final_val_auc = None
    if failure is None:
        final_val_auc = monitor.last_auc if monitor.last_eval_step == step else monitor.validate(step)

    values = unit_gate_values(gates)
    all_values = np.concatenate([v.reshape(-1) for v in values])
    polarization = polarization_report(all_values)
    if failure is None and polarization.mid_band_mass > 0:
        logger.warning(
            f"gates not fully polarized: {polarization.mid_band_mass:.3f} of gates in the mid band"
        )
    unit_level = cfg.granularity != "entry"
    report = SearchReport(
        status="failed" if failure else "ok",
        failure=failure,
        config=cfg,
        granularity=cfg.granularity,
        chunk=gates.chunk,
        schema_fingerprint=schema.fingerprint(),
        unit_labels=unit_labels(schema, cfg.granularity, gates.chunk),
        trace=monitor.trace,
        auc_curve=monitor.curve,
        final_gates=[float(g) for g in values[0]] if unit_level else None,
        final_stats=gate_stats(values),
        ranking=importance_ranking(values[0]) if unit_level else None,
        polarization=polarization,
        final_val_auc=final_val_auc,
        steps=step,
        eval_passes=monitor.eval_passes,
        wall_time_s=time.perf_counter() - started,
    )
    logger.info(
        f"search {report.status}: {step} steps, {monitor.eval_passes} validation passes, "
        f"final val AUC {final_val_auc}"
    )
    return SearchRun(report=report, params=params, gates=gates, adam=adam, rng=shuffle_rng)


def run_search(cfg: SearchConfig, ds: Dataset) -> SearchReport:
    return search(cfg, ds).report

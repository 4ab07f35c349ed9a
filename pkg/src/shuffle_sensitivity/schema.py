"""
Pydantic documents exchanged between pipeline stages and written to disk.

Config models forbid unknown keys; report models are plain records.
"""

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from .config import (
    ADAM_LR,
    DEFAULT_ALPHA,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CHUNK,
    DEFAULT_EFFECT_SCALE,
    DEFAULT_EMB_DIM,
    DEFAULT_EPOCHS,
    DEFAULT_EVAL_EVERY,
    DEFAULT_HIDDEN,
    DEFAULT_INIT_GATE,
    DEFAULT_N_INFORMATIVE,
    DEFAULT_N_NOISE,
    DEFAULT_N_REDUNDANT,
    DEFAULT_N_SAMPLES,
    DEFAULT_TAU,
    DEFAULT_VOCAB,
    DEFAULT_WARMUP_STEPS,
    GranularityName,
)


class SyntheticSpec(BaseModel):
    """Ground-truth generator settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_informative: int = Field(default=DEFAULT_N_INFORMATIVE, ge=1)
    n_redundant: int = Field(default=DEFAULT_N_REDUNDANT, ge=0)
    n_noise: int = Field(default=DEFAULT_N_NOISE, ge=0)
    vocab: int = Field(default=DEFAULT_VOCAB, ge=2)
    effect_scale: float = Field(default=DEFAULT_EFFECT_SCALE, ge=0.0)
    n_samples: int = Field(default=DEFAULT_N_SAMPLES, ge=1)
    seed: int = 0


class SearchConfig(BaseModel):
    """Hyperparameters shared by search, retrain and the baseline."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    granularity: GranularityName = "field"
    chunk: int = Field(default=DEFAULT_CHUNK, ge=1)
    alpha: float = Field(default=DEFAULT_ALPHA, ge=0.0)
    tau: float = Field(default=DEFAULT_TAU, gt=0.0)
    init_gate: float = Field(default=DEFAULT_INIT_GATE, gt=0.0, lt=1.0)
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    retrain_epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)
    warmup_steps: int = Field(default=DEFAULT_WARMUP_STEPS, ge=0)
    eval_every: int = Field(default=DEFAULT_EVAL_EVERY, ge=1)
    seed: int = 0
    emb_dim: int = Field(default=DEFAULT_EMB_DIM, ge=1)
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    lr: float = Field(default=ADAM_LR, gt=0.0)


class GateStats(BaseModel):
    """Monitoring summary of a gate population."""

    mean: float
    frac_below: dict[str, float] = Field(default_factory=dict)
    frac_above: dict[str, float] = Field(default_factory=dict)
    min_kept: float | None = None
    max_pruned: float | None = None
    count: int = 0


class PolarizationReport(BaseModel):
    """How cleanly gates split into the two modes around 0.5."""

    frac_low: float
    frac_high: float
    mid_band_mass: float
    margin: float | None = None
    eps: float
    delta: float


class EvalResult(BaseModel):
    """AUC and log-loss on one declared split."""

    split: Literal["train", "val", "test"]
    auc: float
    logloss: float
    n: int


class StepLosses(BaseModel):
    task_loss: float
    penalty: float
    total_loss: float


class TraceRow(BaseModel):
    """One gates.csv row; gate_id is a unit index or "summary"."""

    step: int
    gate_id: str
    g_value: float | None = None
    mean_g: float
    frac_below_0_5: float
    val_auc: float | None = None


class AucPoint(BaseModel):
    step: int
    val_auc: float


class SearchReport(BaseModel):
    """Outcome of the gated search stage."""

    status: Literal["ok", "failed"] = "ok"
    failure: str | None = None
    config: SearchConfig
    granularity: GranularityName
    chunk: int
    schema_fingerprint: str
    unit_labels: list[str] = Field(default_factory=list)
    trace: list[TraceRow] = Field(default_factory=list)
    auc_curve: list[AucPoint] = Field(default_factory=list)
    final_gates: list[float] | None = None
    final_stats: GateStats | None = None
    ranking: list[int] | None = None
    polarization: PolarizationReport | None = None
    final_val_auc: float | None = None
    steps: int = 0
    eval_passes: int = 0
    wall_time_s: float = 0.0


class PruneDecision(BaseModel):
    """Which units survive pruning, and the retention it achieves."""

    strategy: Literal["threshold", "topk"]
    threshold: float | None = None
    k: int | None = None
    granularity: GranularityName
    chunk: int = 1
    schema_fingerprint: str
    kept_units: list[int] = Field(default_factory=list)
    kept_fields: list[int] = Field(default_factory=list)
    kept_columns: list[list[int]] = Field(default_factory=list)
    entry_keep: list[list[int]] | None = None
    n_kept: int
    n_total: int
    fr: float
    dr: float


class RetrainReport(BaseModel):
    """Pruned model trained without gates, evaluated on val and test."""

    warm_start: bool
    epochs: int
    schema_fingerprint: str
    n_parameters: int
    val: EvalResult
    test: EvalResult
    wall_time_s: float = 0.0


class PiReport(BaseModel):
    """Permutation importance: AUC drop per field with pass accounting."""

    field_names: list[str]
    importance: list[float]
    base_auc: float
    split: Literal["train", "val", "test"]
    repeats: int
    n_eval_passes: int
    wall_time_s: float = 0.0


class StepwiseRow(BaseModel):
    step: int
    phase: Literal["construction", "verification"]
    added_field: str
    fields: list[str]
    gate: float
    auc: float
    delta_auc: float | None = None


class AlphaProbe(BaseModel):
    alpha: float
    mean_gate: float
    departed: bool


class AlphaTuneResult(BaseModel):
    alpha: float
    activated: bool
    probes: list[AlphaProbe] = Field(default_factory=list)


class ExperimentReport(BaseModel):
    """report.json: every stage run against one --out-dir."""

    config: dict[str, Any] = Field(default_factory=dict)
    alpha_tuning: AlphaTuneResult | None = None
    search: SearchReport | None = None
    decision: PruneDecision | None = None
    retrain: RetrainReport | None = None
    wysiwyg_gap: float | None = None
    permutation_importance: PiReport | None = None
    rank_agreement: float | None = None
    pass_counts: dict[str, int] = Field(default_factory=dict)


class ErrorResponse(BaseModel):
    """Standardized error payload printed by the CLI."""

    error: str
    error_code: str
    details: dict[str, object] | None = None

"""
Pruning decisions: Quality-First (fixed threshold) and Budget-First (Top-K).
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..config import PRUNE_THRESHOLD
from ..errors import ConfigurationError, PreconditionError
from ..metrics import dimension_reduction, feature_retention, importance_ranking
from ..schema import PruneDecision, SearchReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Threshold:
    """Keep every unit with g >= value."""

    value: float = PRUNE_THRESHOLD


@dataclass(frozen=True, slots=True)
class TopK:
    """Keep the k highest gates; ties go to the lower index."""

    k: int


PruneStrategy = Threshold | TopK


def _select(values: np.ndarray, strategy: PruneStrategy) -> np.ndarray:
    """Sorted indices of kept units."""
    if isinstance(strategy, Threshold):
        if not 0.0 < strategy.value < 1.0:
            raise ConfigurationError(f"threshold must lie in (0, 1), got {strategy.value}")
        kept = np.flatnonzero(values >= strategy.value)
        if kept.size == 0:
            raise ConfigurationError(
                f"no gate reaches the threshold {strategy.value}; lower alpha and search again",
                {"max_gate": float(values.max()) if values.size else None},
            )
        return kept
    if not 1 <= strategy.k <= values.size:
        raise ConfigurationError(f"k must lie in [1, {values.size}], got {strategy.k}")
    return np.sort(np.asarray(importance_ranking(values)[: strategy.k], dtype=np.int64))


def _columns_of_units(kept: np.ndarray, chunk: int, widths: Sequence[int]) -> list[list[int]]:
    """Within-field column indices covered by the kept dimension units."""
    bounds = np.cumsum([0, *widths])
    columns: list[list[int]] = [[] for _ in widths]
    for unit in kept:
        for col in range(int(unit) * chunk, (int(unit) + 1) * chunk):
            f = int(np.searchsorted(bounds, col, side="right")) - 1
            columns[f].append(int(col - bounds[f]))
    return columns


def _strategy_fields(strategy: PruneStrategy) -> dict[str, object]:
    if isinstance(strategy, Threshold):
        return {"strategy": "threshold", "threshold": strategy.value}
    return {"strategy": "topk", "k": strategy.k}


def decide_prune(
    report: SearchReport,
    strategy: PruneStrategy,
    entry_gates: Sequence[np.ndarray] | None = None,
    dims: Sequence[int] | None = None,
) -> PruneDecision:
    """
    Turn final gates into a keep set.

    Field and dimension decisions read the report's final gates. Entry
    decisions need the per-table gate matrices (``entry_gates``), which the
    report does not store.

    ``dims`` are the per-field embedding widths; the report's config echo
    supplies them when omitted.

    Raises:
        PreconditionError: If the search failed or entry gates are missing.
        ConfigurationError: If the threshold keeps nothing or k is out of range.
    """
    if report.status != "ok":
        raise PreconditionError(f"search report is incomplete ({report.failure})")
    if report.granularity == "entry":
        if entry_gates is None:
            raise PreconditionError("entry decisions need the per-table gate matrices")
        return _decide_entry(report, strategy, entry_gates)

    if report.final_gates is None:
        raise PreconditionError("search report holds no final gates")
    values = np.asarray(report.final_gates, dtype=np.float64)
    kept = _select(values, strategy)

    if report.granularity == "field":
        widths = list(dims) if dims is not None else [report.config.emb_dim] * values.size
        kept_fields = [int(i) for i in kept]
        kept_columns = [list(range(w)) if i in kept_fields else [] for i, w in enumerate(widths)]
    else:
        n_columns = values.size * report.chunk
        widths = list(dims) if dims is not None else [report.config.emb_dim] * (n_columns // report.config.emb_dim)
        if sum(widths) != n_columns:
            raise ConfigurationError(f"{values.size} dimension gates do not cover widths {widths}")
        kept_columns = _columns_of_units(kept, report.chunk, widths)
        kept_fields = [i for i, cols in enumerate(kept_columns) if cols]

    decision = PruneDecision(
        **_strategy_fields(strategy),  # type: ignore[arg-type]
        granularity=report.granularity,
        chunk=report.chunk,
        schema_fingerprint=report.schema_fingerprint,
        kept_units=[int(i) for i in kept],
        kept_fields=kept_fields,
        kept_columns=kept_columns,
        n_kept=int(kept.size),
        n_total=int(values.size),
        fr=feature_retention(kept_fields, len(widths)),
        dr=dimension_reduction([len(c) for c in kept_columns], widths),
    )
    logger.info(
        f"{decision.strategy} decision: kept {decision.n_kept}/{decision.n_total} "
        f"{report.granularity} units (FR={decision.fr:.3f}, DR={decision.dr:.3f})"
    )
    return decision


def _decide_entry(
    report: SearchReport,
    strategy: PruneStrategy,
    entry_gates: Sequence[np.ndarray],
) -> PruneDecision:
    flat = [np.asarray(g, dtype=np.float64).reshape(-1) for g in entry_gates]
    sizes = [f.size for f in flat]
    kept = _select(np.concatenate(flat), strategy)
    bounds = np.cumsum([0, *sizes])
    entry_keep = [
        [int(i - bounds[t]) for i in kept[(kept >= bounds[t]) & (kept < bounds[t + 1])]]
        for t in range(len(flat))
    ]
    kept_fields = [t for t, keep in enumerate(entry_keep) if keep]
    total = int(bounds[-1])
    decision = PruneDecision(
        **_strategy_fields(strategy),  # type: ignore[arg-type]
        granularity="entry",
        chunk=1,
        schema_fingerprint=report.schema_fingerprint,
        kept_fields=kept_fields,
        entry_keep=entry_keep,
        n_kept=int(kept.size),
        n_total=total,
        fr=feature_retention(kept_fields, len(flat)),
        dr=kept.size / total,
    )
    logger.info(
        f"{decision.strategy} decision: kept {decision.n_kept}/{total} entries "
        f"across {len(kept_fields)} fields"
    )
    return decision

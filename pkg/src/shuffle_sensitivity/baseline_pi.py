"""
Permutation importance: the post-hoc baseline.

Every full-split model evaluation is counted, so the cost comparison with a
single gated training run is made on pass counts rather than wall time.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .backbone import BackboneParams, predict_logits
from .config import DEFAULT_BATCH_SIZE, DEFAULT_PI_REPEATS, STREAM_PI
from .data import Dataset, SplitName
from .errors import ConfigurationError, DomainError
from .metrics import auc, importance_ranking, kendall_tau
from .schema import PiReport

logger = logging.getLogger(__name__)


def _permuted_auc(
    params: BackboneParams,
    X: np.ndarray,
    y: np.ndarray,
    field: int,
    repeat: int,
    seed: int,
    batch_size: int,
) -> float:
    rng = np.random.default_rng([seed, STREAM_PI, repeat, field])
    Xp = X.copy()
    Xp[:, field] = X[rng.permutation(X.shape[0]), field]
    return auc(predict_logits(params, Xp, batch_size=batch_size), y)


def permutation_importance(
    params: BackboneParams,
    ds: Dataset,
    split: SplitName = "val",
    repeats: int = DEFAULT_PI_REPEATS,
    seed: int = 0,
    *,
    batch_size: int = DEFAULT_BATCH_SIZE,
    max_workers: int | None = None,
) -> PiReport:
    """
    AUC drop when one field's column is permuted across the whole split.

    Each repeat runs one clean pass plus one pass per field, so
    ``n_eval_passes == (F + 1) * repeats``. Per-field passes run on a thread
    pool against the read-only model; pass counts are summed after all
    workers finish.

    Raises:
        DomainError: If the split holds a single class.
    """
    if repeats < 1:
        raise ConfigurationError(f"repeats must be >= 1, got {repeats}")
    X, y = ds.rows(split)
    if X.shape[0] == 0:
        raise DomainError(f"split {split!r} is empty")
    n_fields = ds.n_fields
    started = time.perf_counter()

    base_aucs = []
    drops = np.zeros((repeats, n_fields))
    passes = 0
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for r in range(repeats):
            base = auc(predict_logits(params, X, batch_size=batch_size), y)
            base_aucs.append(base)
            passes += 1
            futures = [
                pool.submit(_permuted_auc, params, X, y, f, r, seed, batch_size)
                for f in range(n_fields)
            ]
            for f, fut in enumerate(futures):
                drops[r, f] = base - fut.result()
            passes += len(futures)

    importance = drops.mean(axis=0)
    report = PiReport(
        field_names=ds.schema.names,
        importance=[float(v) for v in importance],
        base_auc=float(np.mean(base_aucs)),
        split=split,
        repeats=repeats,
        n_eval_passes=passes,
        wall_time_s=time.perf_counter() - started,
    )
    logger.info(
        f"permutation importance: {n_fields} fields x {repeats} repeats, "
        f"{passes} evaluation passes, base AUC {report.base_auc:.4f}"
    )
    return report


def rank_agreement(pi: PiReport, gates: Sequence[float]) -> float:
    """Kendall tau between the PI ranking and the gate-value ranking."""
    if len(gates) != len(pi.importance):
        raise DomainError(f"{len(pi.importance)} PI scores but {len(gates)} gates")
    return kendall_tau(importance_ranking(pi.importance), importance_ranking(gates))

"""
Evaluation metrics: AUC, log-loss, normalized AUC, retention ratios,
ranking agreement and gate polarization.

All functions are pure.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from typing import Literal

import numpy as np
import numpy.typing as npt
from scipy.stats import rankdata

from .config import MID_BAND, POLAR_HIGH_DELTA, POLAR_LOW_EPS, PRUNE_THRESHOLD
from .errors import ConfigurationError, ContractError, DomainError
from .schema import EvalResult, PolarizationReport


def _binary_labels(labels: npt.ArrayLike, n: int) -> np.ndarray:
    y = np.asarray(labels).reshape(-1)
    if y.size != n:
        raise DomainError(f"{n} scores but {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("labels must be binary")
    return y.astype(bool)


def auc(scores: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """
    ROC AUC as the Mann-Whitney statistic over average ranks.

    Tied scores get half credit.

    Raises:
        DomainError: If only one class is present.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    pos = _binary_labels(labels, s.size)
    n_pos = int(pos.sum())
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("auc needs at least one positive and one negative label")
    ranks = rankdata(s)
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def log_loss_from_logits(logits: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    x = np.asarray(logits, dtype=np.float64).reshape(-1)
    y = _binary_labels(labels, x.size).astype(np.float64)
    if x.size == 0:
        raise DomainError("log-loss needs at least one row")
    return float((np.maximum(x, 0) - x * y + np.log1p(np.exp(-np.abs(x)))).mean())


def eval_result(
    split: Literal["train", "val", "test"],
    logits: npt.ArrayLike,
    labels: npt.ArrayLike,
) -> EvalResult:
    x = np.asarray(logits, dtype=np.float64).reshape(-1)
    return EvalResult(
        split=split,
        auc=auc(x, labels),
        logloss=log_loss_from_logits(x, labels),
        n=int(x.size),
    )


def s_auc(table: Mapping[str, Mapping[str, float]]) -> dict[str, float]:
    """
    Normalized AUC: each dataset's AUCs divided by that dataset's best, averaged.

    ``table`` maps method -> dataset -> AUC.
    """
    if not table:
        raise DomainError("s_auc needs at least one method")
    datasets = sorted({d for row in table.values() for d in row})
    for method, row in table.items():
        missing = [d for d in datasets if d not in row]
        if missing:
            raise DomainError(f"method {method!r} has no AUC for {missing}")
    best = {d: max(row[d] for row in table.values()) for d in datasets}
    return {
        method: float(np.mean([row[d] / best[d] for d in datasets]))
        for method, row in table.items()
    }


def feature_retention(kept: Sequence[int], total: int) -> float:
    kept_set = set(kept)
    if total < 1 or any(not 0 <= k < total for k in kept_set):
        raise ContractError(f"kept fields {sorted(kept_set)} not within {total} fields")
    return len(kept_set) / total


def dimension_reduction(kept_dims: Sequence[int], dims: Sequence[int]) -> float:
    """Kept embedding columns over all embedding columns."""
    total = sum(dims)
    if total < 1:
        raise ContractError("dimension_reduction needs a positive total width")
    return sum(kept_dims) / total


def importance_ranking(values: npt.ArrayLike) -> list[int]:
    """Unit indices by descending value; ties keep the lower index first."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    return [int(i) for i in np.argsort(-v, kind="stable")]


def kendall_tau(rank_a: Sequence[int], rank_b: Sequence[int]) -> float:
    """
    Kendall tau between two orderings of the same items.

    Each argument lists items from most to least important.
    """
    if sorted(rank_a) != sorted(rank_b) or len(set(rank_a)) != len(rank_a):
        raise DomainError("kendall_tau needs two orderings of the same distinct items")
    n = len(rank_a)
    if n < 2:
        raise DomainError("kendall_tau needs at least two items")
    pos_b = {item: i for i, item in enumerate(rank_b)}
    b = np.asarray([pos_b[item] for item in rank_a])
    # rank_a order is 0..n-1, so a pair (i < j) is concordant iff b[i] < b[j]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    diff = np.sign(b[None, :] - b[:, None])[upper]
    concordant = int((diff > 0).sum())
    discordant = int((diff < 0).sum())
    return (concordant - discordant) / (n * (n - 1) / 2)


def polarization_report(
    gates: npt.ArrayLike,
    eps: float = POLAR_LOW_EPS,
    delta: float = POLAR_HIGH_DELTA,
) -> PolarizationReport:
    """Mass near 0, mass near 1, mass inside the mid band, and the 0.5 margin."""
    if not (0.0 < eps < 0.5 and 0.0 < delta < 0.5):
        raise ConfigurationError(f"eps and delta must lie in (0, 0.5), got {eps}, {delta}")
    g = np.asarray(gates, dtype=np.float64).reshape(-1)
    lo, hi = MID_BAND
    kept = g[g >= PRUNE_THRESHOLD]
    pruned = g[g < PRUNE_THRESHOLD]
    margin = float(kept.min() - pruned.max()) if kept.size and pruned.size else None
    return PolarizationReport(
        frac_low=float((g < eps).mean()),
        frac_high=float((g > 1.0 - delta).mean()),
        mid_band_mass=float(((g > lo) & (g < hi)).mean()),
        margin=margin,
        eps=eps,
        delta=delta,
    )

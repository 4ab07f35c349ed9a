"""
Studies built from repeated searches: alpha tuning and sweeps, ranking
stability across alpha, and stepwise validation of a field ranking.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

from ..config import (
    ALPHA_ACTIVATION_DELTA,
    AUTO_ALPHA_MAX,
    AUTO_ALPHA_START,
    BROAD_POLARIZATION,
    PRUNE_THRESHOLD,
)
from ..data import Dataset, select_fields
from ..errors import ConfigurationError, PreconditionError
from ..metrics import kendall_tau
from ..schema import AlphaProbe, AlphaTuneResult, SearchConfig, SearchReport, StepwiseRow
from .search import run_search, train_plain

logger = logging.getLogger(__name__)


def _probe(cfg: SearchConfig, ds: Dataset, alpha: float, epochs: int) -> AlphaProbe:
    report = run_search(cfg.model_copy(update={"alpha": alpha, "epochs": epochs}), ds)
    if report.final_stats is None:
        raise PreconditionError(f"search at alpha={alpha} produced no gate statistics")
    mean_gate = report.final_stats.mean
    departed = cfg.init_gate - mean_gate > ALPHA_ACTIVATION_DELTA
    logger.info(f"alpha {alpha:g}: mean gate {mean_gate:.4f} ({'departed' if departed else 'flat'})")
    return AlphaProbe(alpha=alpha, mean_gate=mean_gate, departed=departed)


def auto_tune_alpha(
    cfg: SearchConfig,
    ds: Dataset,
    start: float = AUTO_ALPHA_START,
    max_alpha: float = AUTO_ALPHA_MAX,
) -> AlphaTuneResult:
    """
    Double alpha from ``start`` until the mean gate leaves its initial value
    by more than the activation delta within the first epoch.
    """
    if start <= 0:
        raise ConfigurationError(f"start alpha must be positive, got {start}")
    probes = []
    alpha = start
    while alpha <= max_alpha:
        probe = _probe(cfg, ds, alpha, epochs=1)
        probes.append(probe)
        if probe.departed:
            logger.info(f"auto-tuned alpha = {alpha:g} after {len(probes)} probes")
            return AlphaTuneResult(alpha=alpha, activated=True, probes=probes)
        alpha *= 2
    logger.warning(f"mean gate never departed up to alpha={max_alpha:g}; keeping {probes[-1].alpha:g}")
    return AlphaTuneResult(alpha=probes[-1].alpha, activated=False, probes=probes)


def alpha_sweep(cfg: SearchConfig, ds: Dataset, alphas: Sequence[float]) -> list[AlphaProbe]:
    """Final mean gate for each alpha, same seed and data."""
    return [_probe(cfg, ds, alpha, epochs=cfg.epochs) for alpha in alphas]


def is_broadly_polarized(report: SearchReport) -> bool:
    if report.final_stats is None:
        return False
    below = report.final_stats.frac_below[f"{PRUNE_THRESHOLD:g}"]
    lo, hi = BROAD_POLARIZATION
    return lo <= below <= hi


def alpha_stability(
    cfg: SearchConfig,
    ds: Dataset,
    alphas: tuple[float, float],
    require_polarization: bool = True,
) -> float:
    """
    Kendall tau between the gate rankings of two searches that differ only in alpha.

    Raises:
        PreconditionError: If either run is not broadly polarized (and
            ``require_polarization`` is set).
    """
    reports = [run_search(cfg.model_copy(update={"alpha": a}), ds) for a in alphas]
    for alpha, report in zip(alphas, reports, strict=True):
        if report.ranking is None:
            raise PreconditionError("alpha_stability needs field or dimension gates")
        if require_polarization and not is_broadly_polarized(report):
            below = report.final_stats.frac_below if report.final_stats else None
            raise PreconditionError(
                f"search at alpha={alpha:g} is not broadly polarized",
                {"alpha": alpha, "frac_below": below},
            )
    tau = kendall_tau(reports[0].ranking or [], reports[1].ranking or [])
    logger.info(f"ranking agreement between alpha {alphas[0]:g} and {alphas[1]:g}: tau={tau:.3f}")
    return tau


def stepwise_validation(cfg: SearchConfig, ds: Dataset, report: SearchReport) -> list[StepwiseRow]:
    """
    Retrain on growing prefixes of the kept fields, then probe each suppressed field.

    Construction adds kept fields in descending gate order and records the
    validation AUC of each prefix. Verification adds every suppressed field,
    one at a time, to the best prefix.
    """
    if report.granularity != "field" or report.ranking is None or report.final_gates is None:
        raise PreconditionError("stepwise validation needs a field-level search report")
    names = report.unit_labels or ds.schema.names
    gates = report.final_gates
    kept = [u for u in report.ranking if gates[u] >= PRUNE_THRESHOLD]
    suppressed = [u for u in report.ranking if gates[u] < PRUNE_THRESHOLD]
    if not kept:
        raise PreconditionError("no field survives the threshold; lower alpha")

    rows: list[StepwiseRow] = []
    previous = None
    best_auc, best_prefix = -1.0, kept[:1]
    for k, unit in enumerate(kept, start=1):
        prefix = kept[:k]
        auc = train_plain(cfg, select_fields(ds, sorted(prefix)), cfg.retrain_epochs).val.auc
        rows.append(
            StepwiseRow(
                step=k,
                phase="construction",
                added_field=names[unit],
                fields=[names[u] for u in prefix],
                gate=gates[unit],
                auc=auc,
                delta_auc=None if previous is None else auc - previous,
            )
        )
        previous = auc
        if auc > best_auc:
            best_auc, best_prefix = auc, prefix

    for j, unit in enumerate(suppressed, start=1):
        fields = [*best_prefix, unit]
        auc = train_plain(cfg, select_fields(ds, sorted(fields)), cfg.retrain_epochs).val.auc
        rows.append(
            StepwiseRow(
                step=len(kept) + j,
                phase="verification",
                added_field=names[unit],
                fields=[names[u] for u in fields],
                gate=gates[unit],
                auc=auc,
                delta_auc=auc - best_auc,
            )
        )
    logger.info(
        f"stepwise validation: peak val AUC {best_auc:.4f} with {len(best_prefix)} fields, "
        f"{len(suppressed)} suppressed fields verified"
    )
    return rows

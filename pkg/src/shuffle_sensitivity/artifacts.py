"""
Artifact files under an output directory.

All paths are resolved inside ``out_dir``. JSON documents are indented
pydantic dumps in field order, so repeated runs produce identical bytes.
"""

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .config import (
    AUC_CURVE_FILE,
    DECISION_FILE,
    GATES_FILE,
    HISTOGRAM_BINS,
    HISTOGRAM_FILE,
    POLARIZATION_FILE,
    REPORT_FILE,
)
from .errors import ConfigurationError, ParseError
from .schema import ExperimentReport, PruneDecision, TraceRow

logger = logging.getLogger(__name__)


def resolve_path_inside_out_dir(out_dir: Path | str, name: str) -> Path:
    """
    Resolve ``name`` under ``out_dir`` and refuse paths that escape it.

    Raises:
        ConfigurationError: If the resolved path leaves the output directory.
    """
    root = Path(out_dir).resolve()
    target = (root / name).resolve()
    try:
        target.relative_to(root)
    except ValueError as e:
        logger.warning(f"Path resolution error: {e}")
        raise ConfigurationError(f"Path {name} escapes output directory {out_dir}")
    return target


def _write_text(out_dir: Path | str, name: str, content: str) -> Path:
    target = resolve_path_inside_out_dir(out_dir, name)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(content, encoding="utf-8")
    logger.info(f"wrote {target}")
    return target


def _write_table(
    out_dir: Path | str,
    name: str,
    header: Sequence[str],
    rows: Sequence[Sequence[float | int | str | None]],
) -> Path:
    """One CSV table; missing values are written as empty cells."""
    target = resolve_path_inside_out_dir(out_dir, name)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame.from_records(rows, columns=list(header))
    frame.to_csv(target, index=False, na_rep="", lineterminator="\n")
    logger.info(f"wrote {target}")
    return target


# =============================================================================
# report.json / decision.json
# =============================================================================


def read_report(out_dir: Path | str) -> ExperimentReport:
    """The existing report, or an empty one when none was written yet."""
    target = resolve_path_inside_out_dir(out_dir, REPORT_FILE)
    if not target.exists():
        return ExperimentReport()
    try:
        return ExperimentReport.model_validate_json(target.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ParseError(f"{target} is not a valid experiment report: {e.error_count()} errors")


def write_report(out_dir: Path | str, report: ExperimentReport) -> Path:
    return _write_text(out_dir, REPORT_FILE, report.model_dump_json(indent=2) + "\n")


def write_decision(out_dir: Path | str, decision: PruneDecision) -> Path:
    return _write_text(out_dir, DECISION_FILE, decision.model_dump_json(indent=2) + "\n")


def read_decision(out_dir: Path | str) -> PruneDecision:
    target = resolve_path_inside_out_dir(out_dir, DECISION_FILE)
    if not target.exists():
        raise ConfigurationError(f"no prune decision at {target}; run prune first")
    try:
        return PruneDecision.model_validate_json(target.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ParseError(f"{target} is not a valid prune decision: {e.error_count()} errors")


# =============================================================================
# gates.csv trace and plot data
# =============================================================================

TRACE_HEADER = ("step", "gate_id", "g_value", "mean_g", "frac_below_0.5", "val_auc")


def write_gate_trace(out_dir: Path | str, trace: Sequence[TraceRow]) -> Path:
    rows = [(r.step, r.gate_id, r.g_value, r.mean_g, r.frac_below_0_5, r.val_auc) for r in trace]
    return _write_table(out_dir, GATES_FILE, TRACE_HEADER, rows)


def gate_histogram(
    values: Sequence[float] | np.ndarray, bins: int = HISTOGRAM_BINS
) -> list[tuple[float, float, int]]:
    """(bin_start, bin_end, count) over [0, 1]."""
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, range=(0.0, 1.0))
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)
    ]


def write_plot_data(
    out_dir: Path | str,
    report: ExperimentReport,
    gate_values: Sequence[float] | np.ndarray | None = None,
) -> list[Path]:
    """
    Gate histogram, gate-learning AUC curve and polarization summary as CSV.

    ``gate_values`` overrides the report's final unit gates (entry runs pass
    every entry gate from the checkpoint).
    """
    if report.search is None:
        raise ConfigurationError("report has no search results; run search first")
    search = report.search
    values = gate_values if gate_values is not None else search.final_gates
    written = []
    if values is not None:
        written.append(
            _write_table(
                out_dir, HISTOGRAM_FILE, ("bin_start", "bin_end", "count"), gate_histogram(values)
            )
        )
    curve_rows = [(p.step, p.val_auc) for p in search.auc_curve]
    written.append(_write_table(out_dir, AUC_CURVE_FILE, ("step", "val_auc"), curve_rows))
    if search.polarization is not None:
        p = search.polarization
        rows = [
            ("frac_low", p.frac_low),
            ("frac_high", p.frac_high),
            ("mid_band_mass", p.mid_band_mass),
            ("margin", p.margin),
            ("eps", p.eps),
            ("delta", p.delta),
        ]
        written.append(_write_table(out_dir, POLARIZATION_FILE, ("metric", "value"), rows))
    return written

"""
Command-line entry point.

Each subcommand binds one pipeline stage and reads or updates the artifacts
under ``--out-dir``: dataset.csv, roles.csv, checkpoint.bin, gates.csv,
decision.json and report.json.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from . import configure_logging
from .artifacts import (
    read_decision,
    read_report,
    resolve_path_inside_out_dir,
    write_decision,
    write_gate_trace,
    write_plot_data,
    write_report,
)
from .backbone import check_fingerprint, load_checkpoint, save_checkpoint
from .baseline_pi import permutation_importance, rank_agreement
from .config import CHECKPOINT_FILE, DATASET_FILE, ROLES_FILE
from .data import Dataset, generate_synthetic, load_csv, read_roles, split, write_csv, write_roles
from .effective_config import RunConfig, load_run_config
from .errors import ConfigurationError, ParseError, PreconditionError, ShuffleSensitivityError
from .gates import unit_gate_values
from .pipeline import (
    Threshold,
    TopK,
    auto_tune_alpha,
    decide_prune,
    run_retrain,
    search,
    train_plain,
    wysiwyg_gap,
)
from .schema import ErrorResponse, ExperimentReport, SearchConfig, SyntheticSpec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


# =============================================================================
# Argument parsing
# =============================================================================


def _shared_flags() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="TOML run configuration")
    shared.add_argument("--seed", type=int, help="seed for data, initialization and shuffles")
    shared.add_argument("--out-dir", help="directory holding every artifact of the run")
    shared.add_argument("--data", help="dataset CSV (defaults to <out-dir>/dataset.csv)")
    shared.add_argument("--alpha", type=float, help="sparsity weight")
    shared.add_argument("--granularity", choices=("field", "dim", "entry"))
    shared.add_argument("--chunk", type=int, help="columns per dimension gate")
    shared.add_argument("--epochs", type=int, help="search epochs")
    shared.add_argument("--batch-size", type=int)
    shared.add_argument(
        "--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
    )
    return shared


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_flags()
    parser = argparse.ArgumentParser(
        prog="shuffle-sensitivity",
        description="Shuffle-gate feature, dimension and embedding-entry selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", parents=[shared], help="write a synthetic dataset")
    gen.add_argument("--n-informative", type=int)
    gen.add_argument("--n-redundant", type=int)
    gen.add_argument("--n-noise", type=int)
    gen.add_argument("--vocab", type=int)
    gen.add_argument("--n-samples", type=int)
    gen.add_argument("--effect-scale", type=float)

    s = sub.add_parser("search", parents=[shared], help="learn gates jointly with the backbone")
    s.add_argument("--auto-alpha", action="store_true", help="tune alpha before searching")

    p = sub.add_parser("prune", parents=[shared], help="turn final gates into a decision")
    p.add_argument("--strategy", choices=("threshold", "topk"))
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)

    r = sub.add_parser("retrain", parents=[shared], help="physically prune and retrain")
    r.add_argument("--warm-start", action="store_true", default=None)

    pi = sub.add_parser("pi", parents=[shared], help="permutation-importance baseline")
    pi.add_argument("--repeats", type=int)
    pi.add_argument("--split", choices=("train", "val", "test"))

    rep = sub.add_parser("report", parents=[shared], help="print the report or write plot data")
    rep.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """CLI flags as a partial RunConfig; unset flags stay None and are skipped."""
    opt = vars(args)
    overrides: dict[str, Any] = {
        "out_dir": opt.get("out_dir"),
        "dataset": {"csv": opt.get("data")},
        "search": {
            "seed": opt.get("seed"),
            "alpha": opt.get("alpha"),
            "granularity": opt.get("granularity"),
            "chunk": opt.get("chunk"),
            "epochs": opt.get("epochs"),
            "batch_size": opt.get("batch_size"),
        },
        "prune": {
            "strategy": opt.get("strategy"),
            "k": opt.get("k"),
            "threshold": opt.get("threshold"),
        },
        "retrain": {"warm_start": opt.get("warm_start")},
        "pi": {"repeats": opt.get("repeats"), "split": opt.get("split")},
    }
    if args.command == "gen-data":
        overrides["dataset"]["synthetic"] = {
            "n_informative": opt.get("n_informative"),
            "n_redundant": opt.get("n_redundant"),
            "n_noise": opt.get("n_noise"),
            "vocab": opt.get("vocab"),
            "n_samples": opt.get("n_samples"),
            "effect_scale": opt.get("effect_scale"),
            "seed": opt.get("seed"),
        }
    return overrides


# =============================================================================
# Shared helpers
# =============================================================================


def _out(cfg: RunConfig, name: str) -> Path:
    return resolve_path_inside_out_dir(cfg.out_dir, name)


def _synthetic_spec(spec: SyntheticSpec | None, seed: int) -> SyntheticSpec:
    """The generator spec; without an explicit seed of its own it follows ``seed``."""
    spec = spec or SyntheticSpec()
    if "seed" in spec.model_fields_set:
        return spec
    return spec.model_copy(update={"seed": seed})


def _load_dataset(cfg: RunConfig, seed: int | None = None) -> Dataset:
    """
    Rows from the configured CSV, the generator, or <out-dir>/dataset.csv; then split.

    ``seed`` drives the split (and an unseeded generator); it defaults to the
    search seed. Post-search stages pass the seed the gates were trained with.
    """
    seed = cfg.search.seed if seed is None else seed
    source = cfg.dataset
    if source.csv is not None:
        ds = load_csv(source.csv, source.label_column)
        roles_path = source.roles
    elif source.synthetic is not None:
        ds = generate_synthetic(_synthetic_spec(source.synthetic, seed))
        roles_path = None
    else:
        default_csv = _out(cfg, DATASET_FILE)
        if not default_csv.exists():
            raise ConfigurationError(
                f"no dataset configured and {default_csv} does not exist; run gen-data or pass --data"
            )
        ds = load_csv(default_csv, source.label_column)
        default_roles = _out(cfg, ROLES_FILE)
        roles_path = str(default_roles) if default_roles.exists() else None
    if roles_path is not None:
        ds = replace(ds, roles=read_roles(roles_path, ds.schema))
    return split(ds, seed=seed)


def _start_report(cfg: RunConfig) -> ExperimentReport:
    report = read_report(cfg.out_dir)
    return report.model_copy(update={"config": cfg.model_dump(mode="json")})


def _search_config(cfg: RunConfig, report: ExperimentReport) -> SearchConfig:
    """The configuration that trained the gates, so later stages share the schema."""
    if report.search is None:
        return cfg.search
    return report.search.config.model_copy(
        update={"retrain_epochs": cfg.search.retrain_epochs, "batch_size": cfg.search.batch_size}
    )


# =============================================================================
# Commands
# =============================================================================


def cmd_gen_data(cfg: RunConfig) -> int:
    ds = generate_synthetic(_synthetic_spec(cfg.dataset.synthetic, cfg.search.seed))
    data_path = _out(cfg, DATASET_FILE)
    data_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, data_path, cfg.dataset.label_column)
    write_roles(ds, _out(cfg, ROLES_FILE))
    logger.info(f"wrote {ds.n_rows} rows x {ds.n_fields} fields to {data_path}")
    return EXIT_OK


def cmd_search(cfg: RunConfig, auto_alpha: bool = False) -> int:
    ds = _load_dataset(cfg)
    report = _start_report(cfg)
    search_cfg = cfg.search
    tuning = None
    if auto_alpha:
        tuning = auto_tune_alpha(search_cfg, ds)
        search_cfg = search_cfg.model_copy(update={"alpha": tuning.alpha})

    run = search(search_cfg, ds)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        _out(cfg, CHECKPOINT_FILE),
        run.params,
        run.gates,
        run.adam,
        run.rng,
        extra={"stage": "search", "steps": run.report.steps},
    )
    write_gate_trace(out_dir, run.report.trace)

    pass_counts = dict(report.pass_counts)
    pass_counts["search_eval"] = run.report.eval_passes
    report = report.model_copy(
        update={
            "alpha_tuning": tuning,
            "search": run.report,
            "decision": None,
            "retrain": None,
            "wysiwyg_gap": None,
            "rank_agreement": None,
            "pass_counts": pass_counts,
        }
    )
    write_report(out_dir, report)
    if run.report.status != "ok":
        return _fail(
            run.report.failure or "search failed",
            "NUMERIC_ERROR",
            {"steps": run.report.steps},
            EXIT_RUNTIME,
        )
    return EXIT_OK


def cmd_prune(cfg: RunConfig) -> int:
    report = read_report(cfg.out_dir)
    if report.search is None:
        raise ConfigurationError(f"no search results in {cfg.out_dir}; run search first")
    opts = cfg.prune
    if opts.strategy == "topk":
        if opts.k is None:
            raise ConfigurationError("--strategy topk needs --k")
        strategy: Threshold | TopK = TopK(opts.k)
    else:
        strategy = Threshold(opts.threshold)

    ckpt_path = _out(cfg, CHECKPOINT_FILE)
    entry_gates = None
    dims = None
    if ckpt_path.exists():
        ckpt = load_checkpoint(ckpt_path)
        fingerprint = ckpt.params.schema.fingerprint()
        if fingerprint != report.search.schema_fingerprint:
            raise ConfigurationError(
                f"checkpoint schema {fingerprint} does not match search report schema "
                f"{report.search.schema_fingerprint}",
                {"checkpoint": fingerprint, "report": report.search.schema_fingerprint},
            )
        dims = ckpt.params.schema.dims
        if ckpt.gates is not None and report.search.granularity == "entry":
            entry_gates = unit_gate_values(ckpt.gates)

    decision = decide_prune(report.search, strategy, entry_gates=entry_gates, dims=dims)
    write_decision(cfg.out_dir, decision)
    report = _start_report(cfg).model_copy(
        update={"decision": decision, "retrain": None, "wysiwyg_gap": None}
    )
    write_report(cfg.out_dir, report)
    return EXIT_OK


def cmd_retrain(cfg: RunConfig) -> int:
    report = _start_report(cfg)
    decision = read_decision(cfg.out_dir)
    search_cfg = _search_config(cfg, report)
    ds = _load_dataset(cfg, seed=search_cfg.seed)

    search_params = None
    if cfg.retrain.warm_start:
        ckpt = load_checkpoint(_out(cfg, CHECKPOINT_FILE))
        check_fingerprint(decision, ckpt.params.schema)
        search_params = ckpt.params

    retrain = run_retrain(
        search_cfg, ds, decision, warm_start=cfg.retrain.warm_start, search_params=search_params
    )
    gap = wysiwyg_gap(report.search, retrain) if report.search is not None else None
    pass_counts = dict(report.pass_counts)
    pass_counts["retrain_eval"] = 2
    report = report.model_copy(
        update={
            "decision": decision,
            "retrain": retrain,
            "wysiwyg_gap": gap,
            "pass_counts": pass_counts,
        }
    )
    write_report(cfg.out_dir, report)
    if gap is not None:
        logger.info(f"WYSIWYG gap: {gap:.5f}")
    return EXIT_OK


def cmd_pi(cfg: RunConfig) -> int:
    report = _start_report(cfg)
    search_cfg = _search_config(cfg, report)
    ds = _load_dataset(cfg, seed=search_cfg.seed)
    reference = train_plain(search_cfg, ds)
    pi = permutation_importance(
        reference.params,
        ds,
        split=cfg.pi.split,
        repeats=cfg.pi.repeats,
        seed=search_cfg.seed,
        batch_size=search_cfg.batch_size,
    )
    agreement = None
    if (
        report.search is not None
        and report.search.granularity == "field"
        and report.search.final_gates is not None
    ):
        agreement = rank_agreement(pi, report.search.final_gates)
        logger.info(f"PI vs gate ranking: Kendall tau {agreement:.3f}")
    pass_counts = dict(report.pass_counts)
    pass_counts["pi_eval"] = pi.n_eval_passes
    report = report.model_copy(
        update={
            "permutation_importance": pi,
            "rank_agreement": agreement,
            "pass_counts": pass_counts,
        }
    )
    write_report(cfg.out_dir, report)
    return EXIT_OK


def cmd_report(cfg: RunConfig, fmt: str = "json") -> int:
    report = read_report(cfg.out_dir)
    if fmt == "json":
        print(report.model_dump_json(indent=2))
        return EXIT_OK
    gate_values = None
    if report.search is not None and report.search.granularity == "entry":
        ckpt = load_checkpoint(_out(cfg, CHECKPOINT_FILE))
        if ckpt.gates is not None:
            gate_values = [float(v) for g in unit_gate_values(ckpt.gates) for v in g.reshape(-1)]
    for path in write_plot_data(cfg.out_dir, report, gate_values):
        print(path)
    return EXIT_OK


# =============================================================================
# Entry point
# =============================================================================


def _dispatch(args: argparse.Namespace, cfg: RunConfig) -> int:
    commands: dict[str, Callable[[], int]] = {
        "gen-data": lambda: cmd_gen_data(cfg),
        "search": lambda: cmd_search(cfg, auto_alpha=args.auto_alpha),
        "prune": lambda: cmd_prune(cfg),
        "retrain": lambda: cmd_retrain(cfg),
        "pi": lambda: cmd_pi(cfg),
        "report": lambda: cmd_report(cfg, fmt=args.format),
    }
    return commands[args.command]()


def _fail(error: str, error_code: str, details: dict[str, Any] | None, exit_code: int) -> int:
    response = ErrorResponse(error=error, error_code=error_code, details=details or None)
    print(response.model_dump_json(exclude_none=True, indent=2), file=sys.stderr)
    return exit_code


def main(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        cfg = load_run_config(args.config, _overrides(args))
        logger.info(f"{args.command}: out_dir={cfg.out_dir}, seed={cfg.search.seed}")
        return _dispatch(args, cfg)
    except (ConfigurationError, ParseError, PreconditionError) as e:
        logger.error(f"{args.command} failed: {e}")
        return _fail(str(e), e.error_code, e.details, EXIT_CONFIG)
    except ValidationError as e:
        return _fail(str(e), "CONFIG_ERROR", {"errors": e.error_count()}, EXIT_CONFIG)
    except ShuffleSensitivityError as e:
        logger.error(f"{args.command} failed: {e}")
        return _fail(str(e), e.error_code, e.details, EXIT_RUNTIME)
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return _fail(str(e), "IO_ERROR", {"path": getattr(e, "filename", None)}, EXIT_RUNTIME)
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly")
        return _fail(str(e), "INTERNAL_ERROR", None, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())

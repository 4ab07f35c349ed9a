from .decide import PruneStrategy, Threshold, TopK, decide_prune
from .retrain import looked_up_pruned_share, run_retrain, stress_entry, wysiwyg_gap
from .search import (
    MODEL_DTYPE,
    PlainRun,
    SearchRun,
    fit,
    fresh_params,
    model_schema,
    run_search,
    search,
    train_plain,
)
from .studies import (
    alpha_stability,
    alpha_sweep,
    auto_tune_alpha,
    is_broadly_polarized,
    stepwise_validation,
)

__all__ = [
    "MODEL_DTYPE",
    "PlainRun",
    "PruneStrategy",
    "SearchRun",
    "Threshold",
    "TopK",
    "alpha_stability",
    "alpha_sweep",
    "auto_tune_alpha",
    "decide_prune",
    "fit",
    "fresh_params",
    "is_broadly_polarized",
    "looked_up_pruned_share",
    "model_schema",
    "run_retrain",
    "run_search",
    "search",
    "stepwise_validation",
    "stress_entry",
    "train_plain",
    "wysiwyg_gap",
]

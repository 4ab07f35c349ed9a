"""
Configuration constants shared by training, gating and reporting.
"""

from __future__ import annotations

from typing import Final, Literal

# =============================================================================
# Gates
# =============================================================================

GranularityName = Literal["field", "dim", "entry"]
GRANULARITIES: Final[tuple[GranularityName, ...]] = ("field", "dim", "entry")

# Temperature of g = sigmoid(tau * phi); fixed, never annealed.
DEFAULT_TAU: Final[float] = 5.0

# Initial gate value; sigmoid cannot reach 1.0, so start just below it.
DEFAULT_INIT_GATE: Final[float] = 0.99

# |phi| used to make sigmoid(tau * phi) evaluate to exactly 0.0 or 1.0.
HARD_GATE_LOGIT: Final[float] = 1.0e4

DEFAULT_ALPHA: Final[float] = 0.01
DEFAULT_WARMUP_STEPS: Final[int] = 0
DEFAULT_CHUNK: Final[int] = 1

# Quality-First cut.
PRUNE_THRESHOLD: Final[float] = 0.5

# Polarization reporting
MID_BAND: Final[tuple[float, float]] = (0.3, 0.7)
POLAR_LOW_EPS: Final[float] = 1.0e-3
POLAR_HIGH_DELTA: Final[float] = 0.05

# Budget-First precondition: share of gates below 0.5 that counts as "broad".
BROAD_POLARIZATION: Final[tuple[float, float]] = (0.25, 0.99)

# Mean-gate departure that marks alpha as active.
ALPHA_ACTIVATION_DELTA: Final[float] = 0.02
AUTO_ALPHA_START: Final[float] = 1.0e-4
AUTO_ALPHA_MAX: Final[float] = 1.0e3

# =============================================================================
# Backbone / optimizer
# =============================================================================

DEFAULT_EMB_DIM: Final[int] = 8
DEFAULT_HIDDEN: Final[tuple[int, ...]] = (64, 32)

ADAM_LR: Final[float] = 1.0e-3
ADAM_BETA1: Final[float] = 0.9
ADAM_BETA2: Final[float] = 0.999
ADAM_EPS: Final[float] = 1.0e-8


# =============================================================================
# Training protocol
# =============================================================================

DEFAULT_BATCH_SIZE: Final[int] = 1024
DEFAULT_EPOCHS: Final[int] = 3
DEFAULT_EVAL_EVERY: Final[int] = 200
SPLIT_RATIOS: Final[tuple[int, int, int]] = (8, 1, 1)
MIN_SPLIT_ROWS: Final[int] = 10

# Independent PRNG streams derived from one seed: default_rng([seed, STREAM, ...]).
STREAM_INIT: Final[int] = 0
STREAM_SHUFFLE: Final[int] = 1
STREAM_EVAL: Final[int] = 2
STREAM_BATCHES: Final[int] = 3
STREAM_PI: Final[int] = 4

# =============================================================================
# Data
# =============================================================================

DEFAULT_N_INFORMATIVE: Final[int] = 5
DEFAULT_N_REDUNDANT: Final[int] = 2
DEFAULT_N_NOISE: Final[int] = 5
DEFAULT_VOCAB: Final[int] = 100
DEFAULT_EFFECT_SCALE: Final[float] = 1.0
DEFAULT_N_SAMPLES: Final[int] = 200_000

# Target base rate for the intercept bisection.
BASE_RATE: Final[float] = 0.5
BASE_RATE_TOLERANCE: Final[float] = 0.02

DEFAULT_LABEL_COLUMN: Final[str] = "label"

# =============================================================================
# Baseline / reporting
# =============================================================================

DEFAULT_PI_REPEATS: Final[int] = 3
HISTOGRAM_BINS: Final[int] = 20

# Stable artifact filenames under --out-dir.
REPORT_FILE: Final[str] = "report.json"
GATES_FILE: Final[str] = "gates.csv"
DECISION_FILE: Final[str] = "decision.json"
CHECKPOINT_FILE: Final[str] = "checkpoint.bin"
DATASET_FILE: Final[str] = "dataset.csv"
ROLES_FILE: Final[str] = "roles.csv"
HISTOGRAM_FILE: Final[str] = "gate_histogram.csv"
AUC_CURVE_FILE: Final[str] = "auc_curve.csv"
POLARIZATION_FILE: Final[str] = "polarization.csv"

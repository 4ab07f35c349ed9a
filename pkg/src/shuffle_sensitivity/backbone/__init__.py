from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .mixers import DimensionMixer, EntryMixer, FieldMixer, GateMixer, get_mixer
from .model import (
    BackboneParams,
    check_gates,
    evaluate,
    forward,
    init_params,
    predict,
    predict_logits,
)
from .optim import Adam
from .prune import check_fingerprint, entry_masks, keep_masks, physical_prune
from .train import train_step

__all__ = [
    "Adam",
    "BackboneParams",
    "Checkpoint",
    "DimensionMixer",
    "EntryMixer",
    "FieldMixer",
    "GateMixer",
    "check_fingerprint",
    "check_gates",
    "entry_masks",
    "evaluate",
    "forward",
    "get_mixer",
    "init_params",
    "keep_masks",
    "load_checkpoint",
    "physical_prune",
    "predict",
    "predict_logits",
    "save_checkpoint",
    "train_step",
]

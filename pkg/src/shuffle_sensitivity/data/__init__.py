from .csv_io import load_csv, read_roles, write_csv, write_roles
from .dataset import (
    SPLIT_NAMES,
    Dataset,
    FieldRole,
    RoleKind,
    SplitName,
    batches,
    select_fields,
    split,
)
from .synthetic import calibrate_bias, generate_synthetic, inject_spurious_field

__all__ = [
    "SPLIT_NAMES",
    "Dataset",
    "FieldRole",
    "RoleKind",
    "SplitName",
    "batches",
    "calibrate_bias",
    "generate_synthetic",
    "inject_spurious_field",
    "load_csv",
    "read_roles",
    "select_fields",
    "split",
    "write_csv",
    "write_roles",
]

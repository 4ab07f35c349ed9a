"""
Run configuration layering: defaults, then the TOML file, then CLI flags.

Later layers win key by key inside each section. Unknown keys fail fast.
"""

from __future__ import annotations

import logging
import tomllib
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import DEFAULT_LABEL_COLUMN, DEFAULT_PI_REPEATS, PRUNE_THRESHOLD
from .errors import ConfigurationError
from .schema import SearchConfig, SyntheticSpec

logger = logging.getLogger(__name__)


class DatasetSource(BaseModel):
    """Where rows come from: a CSV (with optional roles sidecar) or the generator."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    csv: str | None = None
    roles: str | None = None
    label_column: str = DEFAULT_LABEL_COLUMN
    synthetic: SyntheticSpec | None = None


class PruneOptions(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    strategy: Literal["threshold", "topk"] = "threshold"
    threshold: float = Field(default=PRUNE_THRESHOLD, gt=0.0, lt=1.0)
    k: int | None = Field(default=None, ge=1)


class RetrainOptions(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    warm_start: bool = False


class PiOptions(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    repeats: int = Field(default=DEFAULT_PI_REPEATS, ge=1)
    split: Literal["train", "val", "test"] = "val"


class RunConfig(BaseModel):
    """Effective configuration of one CLI invocation, echoed into report.json."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    out_dir: str = "runs"
    dataset: DatasetSource = Field(default_factory=DatasetSource)
    search: SearchConfig = Field(default_factory=SearchConfig)
    prune: PruneOptions = Field(default_factory=PruneOptions)
    retrain: RetrainOptions = Field(default_factory=RetrainOptions)
    pi: PiOptions = Field(default_factory=PiOptions)


def _merge(base: dict[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    """Recursive key-wise merge; None in ``override`` means "not given"."""
    out = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, Mapping):
            current = out.get(key)
            out[key] = _merge(dict(current) if isinstance(current, Mapping) else {}, value)
        else:
            out[key] = value
    return out


def read_config_file(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}", {"path": str(path)})
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid TOML: {e}", {"path": str(path)})


def load_run_config(
    path: Path | str | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    """
    Build the effective RunConfig.

    Raises:
        ConfigurationError: If the file is missing or malformed, or any layer
            sets an unknown key or an invalid value.
    """
    layered: dict[str, Any] = {}
    if path is not None:
        layered = _merge(layered, read_config_file(path))
    if overrides:
        layered = _merge(layered, overrides)
    try:
        cfg = RunConfig.model_validate(layered)
    except ValidationError as e:
        errors = [
            {"loc": ".".join(str(p) for p in err["loc"]), "msg": err["msg"]} for err in e.errors()
        ]
        raise ConfigurationError(f"invalid configuration: {errors[0]['loc']}: {errors[0]['msg']}", {"errors": errors})
    logger.debug(f"effective config: {cfg.model_dump()}")
    return cfg

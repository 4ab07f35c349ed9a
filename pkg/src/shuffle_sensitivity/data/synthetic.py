"""
Ground-truth synthetic datasets.

Informative fields carry per-category logit effects, redundant fields are
fixed bijective recodings of an informative field, noise fields are uniform
and independent of the label.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np
from scipy.special import expit

from ..config import BASE_RATE, BASE_RATE_TOLERANCE, DEFAULT_EMB_DIM
from ..errors import ConfigurationError, PreconditionError
from ..schema import SyntheticSpec
from ..structs import FieldSchema, FieldSpec
from .dataset import Dataset, FieldRole

logger = logging.getLogger(__name__)

_BISECTION_ROUNDS = 60
_BIAS_BRACKET = 50.0


def calibrate_bias(raw_logits: np.ndarray, target: float = BASE_RATE) -> float:
    """Intercept b such that mean(sigmoid(raw + b)) hits ``target``, by bisection."""
    lo, hi = -_BIAS_BRACKET, _BIAS_BRACKET
    for _ in range(_BISECTION_ROUNDS):
        mid = 0.5 * (lo + hi)
        if float(expit(raw_logits + mid).mean()) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_synthetic(spec: SyntheticSpec, emb_dim: int = DEFAULT_EMB_DIM) -> Dataset:
    """
    Draw a dataset whose field roles are known.

    Fields are ordered informative, redundant, noise and named inf_<k>,
    red_<k>, noise_<k>. Redundant field k recodes informative field
    k mod n_informative through a seeded random permutation.

    Raises:
        ConfigurationError: If the spec has no informative field.
    """
    if spec.n_informative < 1:
        raise ConfigurationError("synthetic spec needs at least one informative field")
    rng = np.random.default_rng(spec.seed)
    n, vocab = spec.n_samples, spec.vocab

    effects = rng.normal(0.0, spec.effect_scale, size=(spec.n_informative, vocab))
    informative = rng.integers(0, vocab, size=(n, spec.n_informative))
    raw = effects[np.arange(spec.n_informative), informative].sum(axis=1)
    bias = calibrate_bias(raw)
    y = (rng.random(n) < expit(raw + bias)).astype(np.int64)

    redundant = np.empty((n, spec.n_redundant), dtype=np.int64)
    for k in range(spec.n_redundant):
        recode = rng.permutation(vocab)
        redundant[:, k] = recode[informative[:, k % spec.n_informative]]

    noise = rng.integers(0, vocab, size=(n, spec.n_noise))
    X = np.concatenate([informative, redundant, noise], axis=1).astype(np.int64)

    names = (
        [f"inf_{k}" for k in range(spec.n_informative)]
        + [f"red_{k}" for k in range(spec.n_redundant)]
        + [f"noise_{k}" for k in range(spec.n_noise)]
    )
    roles = (
        [FieldRole("informative")] * spec.n_informative
        + [FieldRole("redundant", k % spec.n_informative) for k in range(spec.n_redundant)]
        + [FieldRole("noise")] * spec.n_noise
    )
    schema = FieldSchema(tuple(FieldSpec(name, vocab, emb_dim) for name in names))

    base_rate = float(y.mean())
    if abs(base_rate - BASE_RATE) > BASE_RATE_TOLERANCE:
        logger.warning(f"synthetic base rate {base_rate:.3f} outside {BASE_RATE}+-{BASE_RATE_TOLERANCE}")
    logger.info(
        f"generated {n} rows, {len(names)} fields "
        f"(bias={bias:.4f}, base_rate={base_rate:.4f}, seed={spec.seed})"
    )
    return Dataset(X=X, y=y, schema=schema, roles=tuple(roles))


def inject_spurious_field(ds: Dataset, field: int, strength: float, seed: int) -> Dataset:
    """
    Replace ``field`` by a binary field that leaks the label on train rows only.

    On train rows the value equals the label with probability ``strength``
    and is a fair coin otherwise; on val and test rows it is always a fair coin.
    """
    if ds.splits is None:
        raise PreconditionError("inject_spurious_field needs a split dataset")
    if not 0 <= field < ds.n_fields:
        raise ConfigurationError(f"field {field} out of range for {ds.n_fields} fields")
    if not 0.0 <= strength <= 1.0:
        raise ConfigurationError(f"strength must lie in [0, 1], got {strength}")
    rng = np.random.default_rng(seed)
    column = rng.integers(0, 2, size=ds.n_rows)
    train = ds.splits["train"]
    leak = rng.random(train.size) < strength
    column[train[leak]] = ds.y[train[leak]]

    X = ds.X.copy()
    X[:, field] = column
    old = ds.schema.fields[field]
    fields = list(ds.schema.fields)
    fields[field] = FieldSpec(f"spurious_{old.name}", 2, old.emb_dim)
    roles = list(ds.roles) if ds.roles is not None else [FieldRole("noise")] * ds.n_fields
    roles[field] = FieldRole("spurious")
    roles = [
        FieldRole(r.kind, None) if r.kind == "redundant" and r.source == field else r
        for r in roles
    ]
    vocabularies = None
    if ds.vocabularies is not None:
        vocabularies = tuple(None if i == field else v for i, v in enumerate(ds.vocabularies))
    logger.info(f"field {old.name!r} replaced by a train-only spurious field (strength={strength})")
    return replace(
        ds,
        X=X,
        schema=FieldSchema(tuple(fields)),
        roles=tuple(roles),
        vocabularies=vocabularies,
    )

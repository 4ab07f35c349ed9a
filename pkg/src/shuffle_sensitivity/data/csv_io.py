"""
Dataset CSV and the roles sidecar.

UTF-8, comma-separated, one header row, no quoting. Feature columns are
integer-coded (ASCII decimal ids) or string-coded; string columns get dense
ids in first-seen order.
"""

from __future__ import annotations

import csv
import logging
import re
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from pandas.errors import EmptyDataError, ParserError

from ..config import DEFAULT_EMB_DIM, DEFAULT_LABEL_COLUMN
from ..errors import ParseError
from ..structs import FieldSchema, FieldSpec
from .dataset import Dataset, FieldRole, RoleKind

logger = logging.getLogger(__name__)

_ROLE_KINDS: tuple[RoleKind, ...] = ("informative", "redundant", "noise", "spurious")
_ROLES_HEADER = ["field", "role", "source_field"]

_RAGGED = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")
_INT_TOKEN = r"[0-9]+"


def _first_line(mask: pd.Series) -> int:
    return int(mask.index[mask.to_numpy()][0])


def _read_frame(path: Path) -> pd.DataFrame:
    """
    Every cell as a stripped string; the index is the 1-based file line.

    Blank lines are dropped but still count toward line numbers.
    """
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            encoding="utf-8",
            keep_default_na=False,
            skip_blank_lines=False,
            quoting=csv.QUOTE_NONE,
        )
    except EmptyDataError:
        raise ParseError("missing header row", line=1) from None
    except ParserError as e:
        m = _RAGGED.search(str(e))
        if m is None:
            raise ParseError(f"malformed CSV {path}: {e}", details={"path": str(path)}) from None
        expected, line, found = (int(g) for g in m.groups())
        raise ParseError(f"expected {expected} columns, found {found}", line=line) from None
    except (OSError, UnicodeDecodeError) as e:
        raise ParseError(f"cannot read {path}: {e}", details={"path": str(path)}) from None

    frame.columns = [str(c).strip() for c in frame.columns]
    if any(c.startswith("Unnamed: ") or not c for c in frame.columns):
        raise ParseError(f"empty header cell in {list(frame.columns)}", line=1)
    frame.index = frame.index + 2

    missing = frame.isna()
    frame = frame[~missing.all(axis=1)]
    short = missing.loc[frame.index].any(axis=1)
    if short.any():
        raise ParseError(
            f"expected {len(frame.columns)} columns, found fewer", line=_first_line(short)
        )
    if frame.empty:
        raise ParseError("no data rows", line=2)

    quoted = frame.apply(lambda s: s.str.contains("[\"']")).any(axis=1)
    if quoted.any():
        raise ParseError("quoted values are not supported", line=_first_line(quoted))
    return frame.apply(lambda s: s.str.strip())


def _integer_ids(tokens: pd.Series, name: str) -> np.ndarray:
    try:
        ids: np.ndarray = tokens.astype(np.int64).to_numpy(copy=True)
    except (ValueError, OverflowError):
        raise ParseError(f"id out of int64 range in column {name!r}") from None
    return ids


def _code_column(
    tokens: pd.Series,
    known: dict[str, int] | None,
    integer_coded: bool,
    name: str,
) -> tuple[np.ndarray, dict[str, int] | None, int]:
    """Integer ids for one column, the string coding used (if any) and the unknown count."""
    is_int = tokens.str.fullmatch(_INT_TOKEN)
    lookalike = tokens.str.isdigit() & ~is_int
    if lookalike.any():
        bad = tokens[_first_line(lookalike)]
        raise ParseError(
            f"id {bad!r} in column {name!r} is not an ASCII decimal integer",
            line=_first_line(lookalike),
        )
    if known is None:
        negative = tokens.str.fullmatch("-" + _INT_TOKEN)
        if negative.any():
            bad = tokens[_first_line(negative)]
            raise ParseError(f"negative id {bad!r} in column {name!r}", line=_first_line(negative))

    if known is not None:
        ids = tokens.map(known).fillna(0).astype(np.int64).to_numpy(copy=True)
        return ids, known, int((~tokens.isin(list(known))).sum())
    if is_int.all():
        return _integer_ids(tokens, name), None, 0
    if integer_coded:
        raise ParseError(
            f"non-integer id {tokens[_first_line(~is_int)]!r} in integer-coded column {name!r}",
            line=_first_line(~is_int),
        )
    codes, uniques = pd.factorize(tokens)
    logger.debug(f"column {name!r} string-coded with {len(uniques)} categories")
    return codes.astype(np.int64), {str(u): i for i, u in enumerate(uniques)}, 0


def load_csv(
    path: Path | str,
    label_column: str = DEFAULT_LABEL_COLUMN,
    *,
    vocabularies: Sequence[dict[str, int] | None] | None = None,
    vocab_sizes: Sequence[int] | None = None,
    emb_dim: int = DEFAULT_EMB_DIM,
) -> Dataset:
    """
    Parse a categorical CSV into a Dataset.

    ``vocabularies`` and ``vocab_sizes`` come from a training dataset when
    loading evaluation data: unseen strings and ids past the known vocabulary
    map to id 0 with a warning. A column the training data coded as integers
    must hold integers here too.

    Raises:
        ParseError: For a missing label column, a non-binary label, a ragged
            row, a negative or non-ASCII id; the message names the line.
    """
    path = Path(path)
    frame = _read_frame(path)
    header = list(frame.columns)
    if label_column not in header:
        raise ParseError(f"label column {label_column!r} not in header {header}", line=1)
    features = [c for c in header if c != label_column]
    if not features:
        raise ParseError("no feature columns besides the label", line=1)

    label_tokens = frame[label_column]
    non_binary = ~label_tokens.isin(["0", "1"])
    if non_binary.any():
        line = _first_line(non_binary)
        raise ParseError(f"label {label_tokens[line]!r} is not binary", line=line)
    labels = label_tokens.astype(np.int64).to_numpy()

    columns: list[np.ndarray] = []
    codings: list[dict[str, int] | None] = []
    sizes: list[int] = []
    for k, name in enumerate(features):
        known = vocabularies[k] if vocabularies is not None else None
        integer_coded = known is None and vocab_sizes is not None
        ids, coding, unknown = _code_column(frame[name], known, integer_coded, name)
        size = int(ids.max()) + 1 if coding is None else max(len(coding), 1)
        if vocab_sizes is not None:
            limit = vocab_sizes[k]
            over = ids >= limit
            unknown += int(over.sum())
            ids[over] = 0
            size = limit
        if unknown:
            logger.warning(f"column {name!r}: {unknown} unknown categories mapped to id 0")
        columns.append(ids)
        codings.append(coding)
        sizes.append(size)

    schema = FieldSchema(
        tuple(FieldSpec(name, size, emb_dim) for name, size in zip(features, sizes, strict=True))
    )
    logger.info(f"loaded {len(frame)} rows x {len(features)} fields from {path}")
    return Dataset(
        X=np.column_stack(columns),
        y=labels,
        schema=schema,
        vocabularies=tuple(codings) if any(c is not None for c in codings) else None,
    )


def write_csv(ds: Dataset, path: Path | str, label_column: str = DEFAULT_LABEL_COLUMN) -> None:
    """Write integer ids with a header; load_csv reproduces X and y."""
    frame = pd.DataFrame(ds.X, columns=ds.schema.names)
    frame[label_column] = ds.y
    frame.to_csv(Path(path), index=False, lineterminator="\n")


def write_roles(ds: Dataset, path: Path | str) -> None:
    """Roles sidecar: field,role,source_field."""
    if ds.roles is None:
        raise ParseError("dataset carries no roles to write")
    names = ds.schema.names
    frame = pd.DataFrame(
        {
            "field": names,
            "role": [role.kind for role in ds.roles],
            "source_field": ["" if r.source is None else names[r.source] for r in ds.roles],
        }
    )
    frame.to_csv(Path(path), index=False, lineterminator="\n")


def read_roles(path: Path | str, schema: FieldSchema) -> tuple[FieldRole, ...]:
    """Parse a roles sidecar against ``schema``; every field must appear once."""
    frame = _read_frame(Path(path))
    if list(frame.columns) != _ROLES_HEADER:
        raise ParseError(f"unexpected roles header {list(frame.columns)}", line=1)
    position = {name: i for i, name in enumerate(schema.names)}
    found: dict[str, FieldRole] = {}
    for lineno, name, kind, source in frame.itertuples(name=None):
        if name not in position:
            raise ParseError(f"field {name!r} not in dataset", line=lineno)
        if kind not in _ROLE_KINDS:
            raise ParseError(f"unknown role {kind!r}", line=lineno)
        if source and source not in position:
            raise ParseError(f"source field {source!r} not in dataset", line=lineno)
        found[name] = FieldRole(kind, position[source] if source else None)
    missing = [n for n in schema.names if n not in found]
    if missing:
        raise ParseError(f"roles missing for fields {missing}")
    return tuple(found[n] for n in schema.names)

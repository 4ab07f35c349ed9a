import logging
from pathlib import Path

import numpy as np
import pytest

from shuffle_sensitivity.data import (
    Dataset,
    generate_synthetic,
    load_csv,
    read_roles,
    write_csv,
    write_roles,
)
from shuffle_sensitivity.errors import ParseError
from shuffle_sensitivity.schema import SyntheticSpec


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "data.csv"
    path.write_text(text, encoding="utf-8")
    return path


def test_integer_columns_infer_vocab(tmp_path: Path) -> None:
    ds = load_csv(_write(tmp_path, "a,b,label\n0,3,1\n2,1,0\n1,0,1\n"))
    assert ds.X.shape == (3, 2)
    assert ds.schema.vocab_sizes == [3, 4]
    np.testing.assert_array_equal(ds.y, [1, 0, 1])
    assert ds.vocabularies is None


def test_string_columns_use_first_seen_ids(tmp_path: Path) -> None:
    ds = load_csv(_write(tmp_path, "city,label\nx,1\ny,0\nx,1\n"))
    np.testing.assert_array_equal(ds.X[:, 0], [0, 1, 0])
    assert ds.vocabularies == ({"x": 0, "y": 1},)


def test_label_column_can_be_anywhere(tmp_path: Path) -> None:
    ds = load_csv(_write(tmp_path, "clicked,a\n1,4\n0,2\n"), label_column="clicked")
    assert ds.schema.names == ["a"]
    np.testing.assert_array_equal(ds.y, [1, 0])


def test_non_binary_label_names_the_line(tmp_path: Path) -> None:
    with pytest.raises(ParseError) as exc:
        load_csv(_write(tmp_path, "a,label\n1,0\n2,2\n"))
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_line_numbers_count_blank_lines(tmp_path: Path) -> None:
    with pytest.raises(ParseError) as exc:
        load_csv(_write(tmp_path, "a,label\n1,0\n\n2,1,7\n"))
    assert exc.value.line == 4


def test_short_row_names_the_line(tmp_path: Path) -> None:
    with pytest.raises(ParseError) as exc:
        load_csv(_write(tmp_path, "a,b,label\n1,2,0\n\n3,1\n"))
    assert exc.value.line == 4


@pytest.mark.parametrize("token", ["\u00b2", "\u0663"])
def test_non_ascii_digits_are_rejected(tmp_path: Path, token: str) -> None:
    with pytest.raises(ParseError) as exc:
        load_csv(_write(tmp_path, f"a,label\n1,0\n{token},1\n"))
    assert exc.value.line == 3
    assert "ASCII" in str(exc.value)


def test_integer_coded_column_must_stay_integer(tmp_path: Path) -> None:
    path = _write(tmp_path, "n,label\n1,1\n2,0\nx,1\n")
    with pytest.raises(ParseError) as exc:
        load_csv(path, vocabularies=[None], vocab_sizes=[5])
    assert exc.value.line == 4


@pytest.mark.parametrize(
    "text",
    [
        "",
        "a,b\n1,0\n",
        "a,label\n",
        'a,label\n"x",1\n',
        "a,label\n-1,1\n",
    ],
)
def test_malformed_files(tmp_path: Path, text: str) -> None:
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, text))


def test_unknown_categories_map_to_zero(tmp_path: Path, caplog: pytest.LogCaptureFixture) -> None:
    path = _write(tmp_path, "city,n,label\nx,1,1\nz,9,0\n")
    with caplog.at_level(logging.WARNING):
        ds = load_csv(path, vocabularies=[{"x": 1, "y": 2}, None], vocab_sizes=[3, 5])
    np.testing.assert_array_equal(ds.X, [[1, 1], [0, 0]])
    assert ds.schema.vocab_sizes == [3, 5]
    assert "unknown categories mapped to id 0" in caplog.text


def test_written_dataset_reloads(tmp_path: Path) -> None:
    ds = generate_synthetic(SyntheticSpec(n_informative=2, n_redundant=1, n_noise=1, vocab=5, n_samples=300))
    path = tmp_path / "out.csv"
    write_csv(ds, path)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "inf_0,inf_1,red_0,noise_0,label"
    back = load_csv(path)
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)


def test_roles_sidecar(tmp_path: Path, tiny_dataset: Dataset) -> None:
    path = tmp_path / "roles.csv"
    write_roles(tiny_dataset, path)
    assert path.read_text(encoding="utf-8").splitlines()[3] == "red_0,redundant,inf_0"
    assert read_roles(path, tiny_dataset.schema) == tiny_dataset.roles


def test_roles_sidecar_errors(tmp_path: Path, tiny_dataset: Dataset) -> None:
    path = tmp_path / "roles.csv"
    path.write_text("field,role,source_field\ninf_0,signal,\n", encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        read_roles(path, tiny_dataset.schema)
    assert exc.value.line == 2

    path.write_text("field,role,source_field\ninf_0,informative,\n", encoding="utf-8")
    with pytest.raises(ParseError, match="roles missing"):
        read_roles(path, tiny_dataset.schema)

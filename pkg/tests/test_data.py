import numpy as np
import pytest

from catvae.core.errors import DataError
from catvae.ml.benchmarks import DATASET_SHAPES
from catvae.ml.data import (
    CategoricalDataset,
    OneHotMatrix,
    from_onehot,
    load_csv,
    marginal_pmf,
    save_csv,
    schema_compatible,
    split,
    to_onehot,
)
from catvae.schemas.data import ColumnSchema, DatasetSchema
from tests.conftest import random_dataset


def test_load_csv_builds_sorted_schema(tmp_path, write_csv) -> None:
    path = write_csv(tmp_path / "d.csv", ["A,B", "y,w", "x,u", "x,v"])
    ds = load_csv(path)
    assert ds.schema.p == 2
    assert ds.schema.sizes == [2, 3]
    assert ds.schema.columns[1].levels == ["u", "v", "w"]
    assert ds.n == 3
    assert ds.rows.tolist() == [[1, 2], [0, 0], [0, 1]]


def test_load_csv_ragged_rows(tmp_path, write_csv) -> None:
    with pytest.raises(DataError, match="Ragged"):
        load_csv(write_csv(tmp_path / "short.csv", ["A,B", "x,u", "y"]))
    with pytest.raises(DataError, match="Ragged"):
        load_csv(write_csv(tmp_path / "long.csv", ["A,B", "x,u", "y,v,w"]))


@pytest.mark.parametrize("lines", [[], ["A,B"]])
def test_load_csv_empty_file(tmp_path, write_csv, lines) -> None:
    with pytest.raises(DataError, match="Empty"):
        load_csv(write_csv(tmp_path / "e.csv", lines))


def test_load_csv_missing_file(tmp_path) -> None:
    with pytest.raises(DataError, match="not found"):
        load_csv(tmp_path / "nope.csv")


def test_constant_column_is_kept_and_flagged(tmp_path, write_csv, log_messages) -> None:
    ds = load_csv(write_csv(tmp_path / "c.csv", ["A,K", "x,k", "y,k"]))
    assert ds.schema.columns[1].constant
    assert ds.schema.constant_columns == [1]
    assert ds.schema.onehot_width == 3
    assert any("single distinct value" in m for m in log_messages)


def test_load_csv_against_schema(tmp_path, write_csv, tiny_schema) -> None:
    ds = load_csv(write_csv(tmp_path / "d.csv", ["A,B", "x,w"]), schema=tiny_schema)
    assert ds.rows.tolist() == [[0, 2]]
    with pytest.raises(DataError, match="outside the schema"):
        load_csv(write_csv(tmp_path / "bad.csv", ["A,B", "z,w"]), schema=tiny_schema)
    with pytest.raises(DataError, match="Schema mismatch"):
        load_csv(write_csv(tmp_path / "names.csv", ["A,C", "x,w"]), schema=tiny_schema)


def test_headerless_file(tmp_path, write_csv) -> None:
    ds = load_csv(write_csv(tmp_path / "h.csv", ["x,u", "y,v"]), header=False)
    assert ds.schema.names == ["col_0", "col_1"]


def test_survey_shaped_schema_width() -> None:
    sizes = [5] * 15 + [4] * 39
    schema = DatasetSchema(
        columns=[ColumnSchema(name=f"v{j}", levels=[str(k) for k in range(t)]) for j, t in enumerate(sizes)]
    )
    assert schema.p == DATASET_SHAPES["survey"].columns
    assert schema.onehot_width == DATASET_SHAPES["survey"].onehot_width


def test_schema_rejects_duplicates_and_single_levels() -> None:
    with pytest.raises(ValueError):
        ColumnSchema(name="A", levels=["x", "x"])
    with pytest.raises(ValueError):
        ColumnSchema(name="A", levels=["x"])


def test_dataset_rejects_bad_indices(tiny_schema) -> None:
    with pytest.raises(DataError):
        CategoricalDataset(tiny_schema, np.array([[0, 3]]))
    with pytest.raises(DataError):
        CategoricalDataset(tiny_schema, np.array([[0, 1, 1]]))


def test_to_onehot_block_layout(tiny_schema) -> None:
    ds = CategoricalDataset(tiny_schema, np.array([[1, 0]]))
    assert to_onehot(ds).values.tolist() == [[0, 1, 1, 0, 0]]


def test_onehot_round_trip() -> None:
    ds = random_dataset((2, 3, 5), n=50, seed=3)
    assert np.array_equal(from_onehot(to_onehot(ds)).rows, ds.rows)


def test_identical_rows_give_identical_onehot(tiny_schema) -> None:
    ds = CategoricalDataset(tiny_schema, np.tile([[1, 2]], (4, 1)))
    values = to_onehot(ds).values
    assert (values == values[0]).all()


def test_from_onehot_argmax_and_ties() -> None:
    schema = DatasetSchema(
        columns=[ColumnSchema(name="A", levels=["a", "b", "c"]), ColumnSchema(name="B", levels=["u", "v"])]
    )
    m = OneHotMatrix(np.array([[0.1, 0.7, 0.2, 0.5, 0.5]]), schema)
    assert from_onehot(m, "argmax").rows.tolist() == [[1, 0]]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_from_onehot_sample_degenerate(seed) -> None:
    schema = DatasetSchema(columns=[ColumnSchema(name="A", levels=["a", "b", "c"])])
    m = OneHotMatrix(np.array([[0.0, 1.0, 0.0]] * 5), schema)
    assert from_onehot(m, "sample", seed=seed).rows.ravel().tolist() == [1] * 5


def test_from_onehot_block_sum_violation(tiny_schema) -> None:
    m = OneHotMatrix(np.array([[0.5, 0.6, 1.0, 0.0, 0.0]]), tiny_schema)
    with pytest.raises(DataError, match="does not sum to 1"):
        from_onehot(m)


def test_split_sizes_and_determinism() -> None:
    ds = random_dataset((2, 3), n=10, seed=0)
    train, test = split(ds, 0.2, seed=1)
    assert (train.n, test.n) == (8, 2)
    again_train, again_test = split(ds, 0.2, seed=1)
    assert np.array_equal(train.rows, again_train.rows)
    assert np.array_equal(test.rows, again_test.rows)


def test_split_is_a_partition() -> None:
    schema = random_dataset((50,), n=1).schema
    indexed = CategoricalDataset(schema, np.arange(50).reshape(50, 1))
    train, test = split(indexed, 0.3, seed=5)
    assert (train.n, test.n) == (35, 15)
    assert sorted(np.concatenate([train.rows.ravel(), test.rows.ravel()]).tolist()) == list(range(50))


def test_split_errors() -> None:
    with pytest.raises(DataError):
        split(random_dataset((2,), n=1), 0.5, seed=0)
    with pytest.raises(DataError):
        split(random_dataset((2,), n=10), 1.0, seed=0)


def test_marginal_pmf() -> None:
    schema = DatasetSchema(columns=[ColumnSchema(name="A", levels=["a", "b", "c"])])
    ds = CategoricalDataset(schema, np.array([[0], [0], [2], [0]]))
    assert marginal_pmf(ds, 0).tolist() == [0.75, 0.0, 0.25]
    with pytest.raises(DataError):
        marginal_pmf(ds, 1)


def test_save_csv_reloads_under_schema(tmp_path, tiny_schema) -> None:
    ds = CategoricalDataset(tiny_schema, np.array([[0, 1], [1, 2]]))
    save_csv(ds, tmp_path / "out.csv")
    assert (tmp_path / "out.csv").read_text().splitlines() == ["A,B", "x,v", "y,w"]
    back = load_csv(tmp_path / "out.csv", schema=tiny_schema)
    assert np.array_equal(back.rows, ds.rows)


def test_decode_rows(tiny_schema) -> None:
    ds = CategoricalDataset(tiny_schema, np.array([[1, 0], [0, 2]]))
    assert ds.decode_rows() == [["y", "u"], ["x", "w"]]


def test_schema_compatible_ignores_constant_flag(tiny_schema) -> None:
    flagged = DatasetSchema(
        columns=[ColumnSchema(name="A", levels=["x", "y"]), ColumnSchema(name="B", levels=["u", "v", "w"], constant=True)]
    )
    renamed = DatasetSchema(
        columns=[ColumnSchema(name="A", levels=["x", "y"]), ColumnSchema(name="C", levels=["u", "v", "w"])]
    )
    assert schema_compatible(tiny_schema, flagged)
    assert not schema_compatible(tiny_schema, renamed)

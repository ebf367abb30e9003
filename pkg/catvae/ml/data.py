import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from catvae.core.errors import DataError
from catvae.schemas.data import ColumnSchema, DatasetSchema

BLOCK_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class CategoricalDataset:
    """Label-encoded rows; `rows[i, j]` indexes `schema.columns[j].levels`."""

    schema: DatasetSchema
    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != self.schema.p:
            raise DataError(f"Rows must be an n x {self.schema.p} matrix, got shape {rows.shape}")
        sizes = np.asarray(self.schema.sizes)
        if rows.size and ((rows < 0).any() or (rows >= sizes).any()):
            raise DataError("Row contains a level index outside its column's level list")
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def subset(self, indices: np.ndarray) -> "CategoricalDataset":
        return CategoricalDataset(self.schema, self.rows[np.asarray(indices, dtype=np.int64)])

    def decode_rows(self) -> List[List[str]]:
        """Rows as level text, in column order."""
        return self.to_frame().to_numpy().tolist()

    def to_frame(self) -> pd.DataFrame:
        data = {
            col.name: np.asarray(col.levels, dtype=object)[self.rows[:, j]]
            for j, col in enumerate(self.schema.columns)
        }
        return pd.DataFrame(data, columns=self.schema.names)


@dataclass(frozen=True)
class OneHotMatrix:
    """Block-structured n x onehot_width matrix; hard encodings or decoder probabilities."""

    values: np.ndarray
    schema: DatasetSchema

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != self.schema.onehot_width:
            raise DataError(
                f"One-hot matrix must have {self.schema.onehot_width} columns, got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _read_frame(path: Path, header: bool) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Data file not found: {path}")
    try:
        frame = pd.read_csv(
            path,
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            quoting=csv.QUOTE_NONE,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"Empty data file: {path}") from exc
    except pd.errors.ParserError as exc:
        raise DataError(f"Ragged rows in {path}: {exc}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"Cannot read {path}: {exc}") from exc
    if frame.empty:
        raise DataError(f"Empty data file: {path}")
    # short rows come back padded with NaN
    if frame.isna().to_numpy().any():
        bad = int(np.flatnonzero(frame.isna().any(axis=1).to_numpy())[0])
        raise DataError(f"Ragged rows in {path}: row {bad + 1} has too few fields")
    if not header:
        frame.columns = [f"col_{j}" for j in range(frame.shape[1])]
    return frame


def _encode(frame: pd.DataFrame, schema: DatasetSchema) -> np.ndarray:
    rows = np.empty(frame.shape, dtype=np.int64)
    for j, col in enumerate(schema.columns):
        codes = pd.Categorical(frame[col.name], categories=col.levels).codes
        if (codes < 0).any():
            unknown = sorted(set(frame[col.name][codes < 0]))
            raise DataError(f"Column '{col.name}' has levels outside the schema: {unknown[:5]}")
        rows[:, j] = codes
    return rows


def schema_from_frame(frame: pd.DataFrame) -> DatasetSchema:
    columns = []
    for name in frame.columns:
        levels = sorted(frame[name].unique().tolist())
        constant = len(levels) < 2
        if constant:
            logger.warning(f"Column '{name}' has a single distinct value; kept and flagged constant")
        columns.append(ColumnSchema(name=str(name), levels=levels, constant=constant))
    return DatasetSchema(columns=columns)


def load_csv(path: Path, header: bool = True, schema: Optional[DatasetSchema] = None) -> CategoricalDataset:
    """Load a categorical CSV.

    Without `schema`, levels are the sorted distinct values of each column.
    With `schema`, rows are encoded against it and any column or level
    mismatch is a DataError.
    """
    frame = _read_frame(path, header)
    if schema is None:
        schema = schema_from_frame(frame)
    else:
        names = [str(c) for c in frame.columns]
        if not header and frame.shape[1] == schema.p:
            names = schema.names
        if names != schema.names:
            raise DataError(f"Schema mismatch in {path}: columns {names} vs {schema.names}")
        frame.columns = schema.names
    dataset = CategoricalDataset(schema, _encode(frame, schema))
    logger.info(f"Loaded {path}: n={dataset.n}, p={schema.p}, onehot_width={schema.onehot_width}")
    return dataset


def schema_compatible(a: DatasetSchema, b: DatasetSchema) -> bool:
    return a.compatible_with(b)


def save_csv(ds: CategoricalDataset, path: Path, header: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ds.to_frame().to_csv(path, index=False, header=header, lineterminator="\n")


def to_onehot(ds: CategoricalDataset) -> OneHotMatrix:
    values = np.zeros((ds.n, ds.schema.onehot_width))
    if ds.n:
        cols = ds.rows + np.asarray(ds.schema.offsets, dtype=np.int64)
        values[np.arange(ds.n)[:, None], cols] = 1.0
    return OneHotMatrix(values, ds.schema)


def from_onehot(
    m: OneHotMatrix,
    mode: Literal["argmax", "sample"] = "argmax",
    seed: Optional[int] = None,
) -> CategoricalDataset:
    """Decode block PMFs to labels. argmax ties go to the lowest level index."""
    schema = m.schema
    rng = np.random.default_rng(seed)
    rows = np.empty((m.n, schema.p), dtype=np.int64)
    for j, block in enumerate(schema.blocks):
        pmf = m.values[:, block]
        sums = pmf.sum(axis=1)
        if m.n and np.abs(sums - 1.0).max() > BLOCK_SUM_TOLERANCE:
            raise DataError(f"Block of column '{schema.columns[j].name}' does not sum to 1")
        if mode == "argmax":
            rows[:, j] = np.argmax(pmf, axis=1)
        elif mode == "sample":
            cdf = np.cumsum(np.clip(pmf, 0.0, None), axis=1)
            cdf /= cdf[:, -1:]
            u = rng.random(m.n)[:, None]
            rows[:, j] = np.minimum((cdf <= u).sum(axis=1), pmf.shape[1] - 1)
        else:
            raise DataError(f"Unknown decoding mode '{mode}'")
    return CategoricalDataset(schema, rows)


def split(
    ds: CategoricalDataset, test_fraction: float, seed: int
) -> Tuple[CategoricalDataset, CategoricalDataset]:
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if ds.n < 2:
        raise DataError(f"Cannot split a dataset with {ds.n} rows")
    n_train = math.ceil(round(ds.n * (1.0 - test_fraction), 9))
    n_train = min(max(n_train, 1), ds.n - 1)
    order = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(order[:n_train]), ds.subset(order[n_train:])


def marginal_pmf(ds: CategoricalDataset, j: int) -> np.ndarray:
    if not 0 <= j < ds.schema.p:
        raise DataError(f"Column index {j} out of range for p={ds.schema.p}")
    if ds.n == 0:
        raise DataError("Marginal of an empty dataset is undefined")
    counts = np.bincount(ds.rows[:, j], minlength=ds.schema.sizes[j])
    return counts / counts.sum()

from typing import Dict, NamedTuple

import numpy as np

from catvae.ml.data import CategoricalDataset
from catvae.schemas.data import ColumnSchema, DatasetSchema


class DatasetShape(NamedTuple):
    train: int
    test: int
    columns: int
    onehot_width: int


# Published real-data shapes, used as size references in tests and docs.
DATASET_SHAPES: Dict[str, DatasetShape] = {
    "survey": DatasetShape(60_000, 2_593, 54, 231),
    "income": DatasetShape(45_000, 5_000, 23, 416),
    "census": DatasetShape(30_000, 5_000, 68, 394),
}

TOY_COLUMNS = 10
TOY_LEVELS = ("a", "b", "c")
TOY_ROOT_PMF = np.array([0.5, 0.3, 0.2])
TOY_STAY = 0.8


def toy_schema(columns: int = TOY_COLUMNS) -> DatasetSchema:
    return DatasetSchema(columns=[ColumnSchema(name=f"X{j}", levels=list(TOY_LEVELS)) for j in range(columns)])


def toy_transition() -> np.ndarray:
    """x_j keeps x_{j-1}'s level with probability TOY_STAY, else moves to another level uniformly."""
    k = len(TOY_LEVELS)
    move = (1.0 - TOY_STAY) / (k - 1)
    return np.full((k, k), move) + np.eye(k) * (TOY_STAY - move)


def toy_bayes_net(n: int, seed: int = 0, columns: int = TOY_COLUMNS) -> CategoricalDataset:
    """Chain Bayes net X0 -> X1 -> ... with strong neighbour dependence."""
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(toy_transition(), axis=1)
    rows = np.empty((n, columns), dtype=np.int64)
    rows[:, 0] = rng.choice(len(TOY_LEVELS), size=n, p=TOY_ROOT_PMF)
    for j in range(1, columns):
        u = rng.random(n)[:, None]
        rows[:, j] = np.minimum((cdf[rows[:, j - 1]] <= u).sum(axis=1), len(TOY_LEVELS) - 1)
    return CategoricalDataset(toy_schema(columns), rows)

from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest
from loguru import logger

from catvae.ml.benchmarks import toy_bayes_net
from catvae.ml.data import CategoricalDataset
from catvae.schemas.data import ColumnSchema, DatasetSchema


def make_schema(*sizes: int) -> DatasetSchema:
    return DatasetSchema(
        columns=[ColumnSchema(name=f"c{j}", levels=[f"l{k}" for k in range(t)]) for j, t in enumerate(sizes)]
    )


def random_dataset(sizes, n: int, seed: int = 0) -> CategoricalDataset:
    rng = np.random.default_rng(seed)
    schema = make_schema(*sizes)
    rows = np.column_stack([rng.integers(0, t, size=n) for t in sizes])
    return CategoricalDataset(schema, rows)


def numeric_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (f(up) - f(down)) / (2.0 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-4) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


@pytest.fixture
def tiny_schema() -> DatasetSchema:
    return DatasetSchema(
        columns=[ColumnSchema(name="A", levels=["x", "y"]), ColumnSchema(name="B", levels=["u", "v", "w"])]
    )


@pytest.fixture
def toy_data() -> CategoricalDataset:
    return toy_bayes_net(400, seed=0)


@pytest.fixture
def write_csv() -> Callable[[Path, List[str]], Path]:
    def _write(path: Path, lines: List[str]) -> Path:
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def log_messages():
    messages: List[str] = []
    handler_id = logger.add(lambda m: messages.append(m.record["message"]), level="DEBUG")
    yield messages
    logger.remove(handler_id)

from pathlib import Path
from typing import Tuple

from loguru import logger

from catvae.ml.benchmarks import toy_bayes_net
from catvae.ml.data import CategoricalDataset, save_csv, split


class ToyDataController:
    def write(self, out: Path, n: int, seed: int, test_fraction: float = 0.2) -> Tuple[CategoricalDataset, CategoricalDataset]:
        train, test = split(toy_bayes_net(n, seed), test_fraction, seed)
        out = Path(out)
        save_csv(train, out / "train.csv")
        save_csv(test, out / "test.csv")
        logger.info(f"Toy Bayes-net data: {train.n} train / {test.n} test rows in {out}")
        return train, test

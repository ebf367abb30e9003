"""One-vs-all conditional classifiers p(x_j | x_{-j}) and the regularizer built on them."""
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from catvae.core.errors import DataError, StateError
from catvae.core.persistence import read_weight_file, write_weight_file
from catvae.ml import autodiff as ad
from catvae.ml.autodiff import Node, ParamStore, Tape, lift
from catvae.ml.data import CategoricalDataset, OneHotMatrix, to_onehot
from catvae.ml.model import cross_entropy
from catvae.ml.optim import AdamOptimizer
from catvae.schemas.data import DatasetSchema


class ClassifierBank:
    """Per-column linear softmax models over the one-hot encoding of the other columns."""

    KIND = "classifier_bank"

    def __init__(self, schema: DatasetSchema, params: Optional[ParamStore] = None, frozen: bool = False) -> None:
        self.schema = schema
        layout = self.layout(schema)
        if params is None:
            params = ParamStore(layout)
        elif [s.name for s in params.slices] != [name for name, _ in layout]:
            raise DataError("Parameter store does not match the classifier bank layout")
        self.params = params
        self.frozen = frozen
        width = schema.onehot_width
        self._inputs = [
            np.concatenate([np.arange(0, b.start), np.arange(b.stop, width)]).astype(np.int64)
            for b in schema.blocks
        ]

    @staticmethod
    def layout(schema: DatasetSchema) -> List[Tuple[str, Tuple[int, ...]]]:
        layout = []
        for j, size in enumerate(schema.sizes):
            layout += [
                (f"clf/{j}/weight", (schema.onehot_width - size, size)),
                (f"clf/{j}/bias", (size,)),
            ]
        return layout

    def input_columns(self, j: int) -> np.ndarray:
        return self._inputs[j]

    def log_probs(self, x: Node, j: int, weights: Node, bias: Node) -> Node:
        size = self.schema.sizes[j]
        logits = ad.dense(x[:, self._inputs[j]], weights, bias)
        return ad.log_softmax_blocks(logits, [slice(0, size)])

    def predict_log_proba(self, x, j: int) -> np.ndarray:
        tape = Tape(self.params)
        node = tape.lift(np.asarray(x, dtype=np.float64))
        return self.log_probs(node, j, tape.param(f"clf/{j}/weight"), tape.param(f"clf/{j}/bias")).value

    def save(self, path: Path) -> None:
        write_weight_file(
            path,
            self.KIND,
            self.schema.fingerprint(),
            self.params.directory(),
            self.params.vector,
            meta={"frozen": self.frozen},
        )

    @classmethod
    def load(cls, path: Path, schema: DatasetSchema) -> "ClassifierBank":
        directory, values = read_weight_file(path, cls.KIND, schema.fingerprint())
        params = ParamStore.from_directory(directory["slices"], values)
        return cls(schema, params, frozen=bool(directory["meta"].get("frozen", False)))


def _bank_loss(bank: ClassifierBank, tape: Tape, x: np.ndarray) -> Node:
    xn = tape.constant(x)
    total = None
    for j, block in enumerate(bank.schema.blocks):
        logp = bank.log_probs(xn, j, tape.param(f"clf/{j}/weight"), tape.param(f"clf/{j}/bias"))
        term = cross_entropy(x[:, block], logp)
        total = term if total is None else total + term
    return total


def pretrain(
    bank: ClassifierBank,
    ds: CategoricalDataset,
    epochs: int = 30,
    learning_rate: float = 1e-2,
    seed: int = 0,
    batch_size: int = 256,
) -> ClassifierBank:
    """Maximize sum_j log p(x_j | x_{-j}) by minibatch Adam, then freeze the bank."""
    if ds.n == 0:
        raise DataError("Cannot pre-train classifiers on an empty dataset")
    if bank.frozen:
        raise StateError("Classifier bank is already frozen")
    if not bank.schema.compatible_with(ds.schema):
        raise DataError("Classifier bank schema does not match the dataset")
    x = to_onehot(ds).values
    rng = np.random.default_rng(seed)
    optimizer = AdamOptimizer(bank.params, learning_rate)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(ds.n)
        epoch_loss = 0.0
        for start in range(0, ds.n, batch_size):
            rows = order[start : start + batch_size]
            tape = Tape(bank.params)
            loss = _bank_loss(bank, tape, x[rows])
            epoch_loss += float(loss.value) * rows.size
            optimizer.step(tape.backward(loss).params)
        logger.debug(f"Classifier epoch {epoch}/{epochs}: loss {epoch_loss / ds.n:.6f}")
    bank.frozen = True
    logger.info(f"Pre-trained {bank.schema.p} classifiers; train accuracy {np.round(accuracy(bank, ds), 4).tolist()}")
    return bank


def accuracy(bank: ClassifierBank, ds: CategoricalDataset) -> np.ndarray:
    x = to_onehot(ds).values
    return np.array(
        [np.mean(np.argmax(bank.predict_log_proba(x, j), axis=1) == ds.rows[:, j]) for j in range(ds.schema.p)]
    )


def column_log_likelihood(bank: ClassifierBank, ds: CategoricalDataset) -> np.ndarray:
    """Mean log p(x_j | x_{-j}) per column."""
    x = to_onehot(ds).values
    out = []
    for j in range(ds.schema.p):
        logp = bank.predict_log_proba(x, j)
        out.append(logp[np.arange(ds.n), ds.rows[:, j]].mean())
    return np.array(out)


@lift
def _regularizer(bank: ClassifierBank, x_hat):
    tape = x_hat.tape
    total = None
    for j, block in enumerate(bank.schema.blocks):
        weights = tape.constant(bank.params.view(f"clf/{j}/weight"))
        bias = tape.constant(bank.params.view(f"clf/{j}/bias"))
        term = cross_entropy(x_hat[:, block], bank.log_probs(x_hat, j, weights, bias))
        total = term if total is None else total + term
    return total


def classification_regularizer(bank: ClassifierBank, x_hat):
    """-(1/n) sum_i sum_j sum_l x_hat[i, j, l] * log p_l(x_hat[i, -j]).

    Soft targets and soft inputs. Bank weights enter as constants, so no
    gradient reaches them.
    """
    if not bank.frozen:
        raise StateError("Classifier bank must be pre-trained and frozen")
    if isinstance(x_hat, OneHotMatrix):
        x_hat = x_hat.values
    width = x_hat.shape[-1]
    if width != bank.schema.onehot_width:
        raise DataError(f"Regularizer expects width {bank.schema.onehot_width}, got {width}")
    return _regularizer(bank, x_hat)

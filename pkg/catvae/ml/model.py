from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from catvae.core.errors import DataError
from catvae.core.persistence import read_weight_file, write_weight_file
from catvae.ml import autodiff as ad
from catvae.ml.autodiff import Node, ParamStore, Tape, lift
from catvae.ml.data import OneHotMatrix
from catvae.schemas.config import Step1Config
from catvae.schemas.data import DatasetSchema

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class LatentBatch:
    """Latent draws z = mu + sqrt(var) * eps, kept with the noise that formed them."""

    z: np.ndarray
    eps: np.ndarray
    mu: np.ndarray
    var: np.ndarray

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.z.shape[1]


class EncoderDecoder:
    """Gaussian encoder and per-column softmax decoder over one parameter store."""

    KIND = "encoder_decoder"

    def __init__(
        self,
        schema: DatasetSchema,
        latent_dim: int = 2,
        hidden_sizes: Sequence[int] = (64, 64),
        activation: Literal["relu", "tanh"] = "relu",
        variance_floor: float = 1e-8,
        params: Optional[ParamStore] = None,
    ) -> None:
        self.schema = schema
        self.latent_dim = latent_dim
        self.hidden_sizes = list(hidden_sizes)
        self.activation = activation
        self.variance_floor = variance_floor
        layout = self.layout(schema, latent_dim, self.hidden_sizes)
        if params is None:
            params = ParamStore(layout)
        elif [s.name for s in params.slices] != [name for name, _ in layout]:
            raise DataError("Parameter store does not match the encoder/decoder layout")
        self.params = params

    @staticmethod
    def layout(schema: DatasetSchema, latent_dim: int, hidden_sizes: List[int]) -> List[Tuple[str, Tuple[int, ...]]]:
        layout = []
        width = schema.onehot_width
        for i, size in enumerate(hidden_sizes):
            layout += [(f"enc/h{i}/weight", (width, size)), (f"enc/h{i}/bias", (size,))]
            width = size
        layout += [
            ("enc/mu/weight", (width, latent_dim)),
            ("enc/mu/bias", (latent_dim,)),
            ("enc/var/weight", (width, latent_dim)),
            ("enc/var/bias", (latent_dim,)),
        ]
        width = latent_dim
        for i, size in enumerate(hidden_sizes):
            layout += [(f"dec/h{i}/weight", (width, size)), (f"dec/h{i}/bias", (size,))]
            width = size
        layout += [("dec/out/weight", (width, schema.onehot_width)), ("dec/out/bias", (schema.onehot_width,))]
        return layout

    @classmethod
    def from_config(cls, schema: DatasetSchema, cfg: Step1Config) -> "EncoderDecoder":
        model = cls(schema, cfg.latent_dim, cfg.hidden_sizes, cfg.activation, cfg.variance_floor)
        model.params.glorot_init(cfg.seed)
        return model

    def _act(self, h: Node) -> Node:
        return ad.relu(h) if self.activation == "relu" else ad.tanh(h)

    def encoder(self, tape: Tape, x) -> Tuple[Node, Node]:
        h = tape.lift(x)
        if h.shape[-1] != self.schema.onehot_width:
            raise DataError(f"Encoder expects width {self.schema.onehot_width}, got {h.shape[-1]}")
        for i in range(len(self.hidden_sizes)):
            h = self._act(ad.dense(h, tape.param(f"enc/h{i}/weight"), tape.param(f"enc/h{i}/bias")))
        mu = ad.dense(h, tape.param("enc/mu/weight"), tape.param("enc/mu/bias"))
        raw = ad.dense(h, tape.param("enc/var/weight"), tape.param("enc/var/bias"))
        return mu, ad.softplus(raw) + self.variance_floor

    def decoder(self, tape: Tape, z) -> Node:
        """Block log-probabilities of the decoder, n x onehot_width."""
        h = tape.lift(z)
        if h.shape[-1] != self.latent_dim:
            raise DataError(f"Decoder expects {self.latent_dim} latent columns, got {h.shape[-1]}")
        for i in range(len(self.hidden_sizes)):
            h = self._act(ad.dense(h, tape.param(f"dec/h{i}/weight"), tape.param(f"dec/h{i}/bias")))
        logits = ad.dense(h, tape.param("dec/out/weight"), tape.param("dec/out/bias"))
        return ad.log_softmax_blocks(logits, self.schema.blocks)

    def save(self, path: Path) -> None:
        write_weight_file(
            path,
            self.KIND,
            self.schema.fingerprint(),
            self.params.directory(),
            self.params.vector,
            meta={
                "latent_dim": self.latent_dim,
                "hidden_sizes": self.hidden_sizes,
                "activation": self.activation,
                "variance_floor": self.variance_floor,
            },
        )

    @classmethod
    def load(cls, path: Path, schema: DatasetSchema) -> "EncoderDecoder":
        directory, values = read_weight_file(path, cls.KIND, schema.fingerprint())
        meta = directory["meta"]
        params = ParamStore.from_directory(directory["slices"], values)
        return cls(schema, meta["latent_dim"], meta["hidden_sizes"], meta["activation"], meta["variance_floor"], params)


def _matrix(batch) -> np.ndarray:
    return batch.values if isinstance(batch, OneHotMatrix) else np.asarray(batch, dtype=np.float64)


def encode(model: EncoderDecoder, batch) -> Tuple[np.ndarray, np.ndarray]:
    tape = Tape(model.params)
    mu, var = model.encoder(tape, _matrix(batch))
    return mu.value, var.value


def decode(model: EncoderDecoder, z) -> OneHotMatrix:
    z = z.z if isinstance(z, LatentBatch) else z
    tape = Tape(model.params)
    return OneHotMatrix(np.exp(model.decoder(tape, np.asarray(z, dtype=np.float64)).value), model.schema)


def reparameterize(mu: np.ndarray, var: np.ndarray, seed: Optional[int] = None, floor: float = 1e-8) -> LatentBatch:
    mu = np.asarray(mu, dtype=np.float64)
    var = np.maximum(np.asarray(var, dtype=np.float64), floor)
    eps = np.random.default_rng(seed).standard_normal(mu.shape)
    return LatentBatch(mu + np.sqrt(var) * eps, eps, mu, var)


def reparameterize_nodes(mu: Node, var: Node, eps: np.ndarray) -> Node:
    return mu + ad.sqrt(var) * eps


@lift
def cross_entropy(batch, log_probs):
    """-(1/n) sum over rows, columns and levels of target * log-probability."""
    n = log_probs.shape[0]
    return -(batch * log_probs).sum() * (1.0 / n)


@lift
def recon_loss(batch, probs):
    return cross_entropy(batch, ad.log(probs))


@lift
def posterior_logpdf(z, mu, var):
    """Diagonal Gaussian log-density, summed over the last axis."""
    diff = z - mu
    return ((ad.log(var) + diff * diff / var) + LOG_2PI).sum(axis=-1) * -0.5


@lift
def entropy_reg_estimate(mu, var, z):
    """Minibatch estimate of E[log q(z|x)] - E_{p(x)q(z)}[log q(z|x)].

    Self terms use each row's own draw; the cross term averages
    log q(z_j | x_i) over all n^2 pairs of the batch.
    """
    n, d = mu.shape
    if n < 2:
        raise DataError("The entropy regularization estimate needs at least 2 rows")
    own = posterior_logpdf(z, mu, var).mean()
    diff = z.reshape(1, n, d) - mu.reshape(n, 1, d)
    var3 = var.reshape(n, 1, d)
    quad = (diff * diff / var3).sum(axis=2)
    logdet = ad.log(var).sum(axis=1).reshape(n, 1)
    pairwise = (quad + logdet + d * LOG_2PI) * -0.5
    return own - pairwise.mean()


@lift
def vae_kl(mu, var):
    """Mean KL(q(z|x) || N(0, I)) over rows."""
    return (mu * mu + var - ad.log(var) - 1.0).sum(axis=1).mean() * 0.5


def entropy_reg_upper_bound(mu: np.ndarray, var: np.ndarray) -> float:
    """Exact value of the entropy-regularization bound for n Gaussian posteriors."""
    mu = np.asarray(mu, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    own = -0.5 * (np.log(2.0 * np.pi * var) + 1.0).sum(axis=1).mean()
    # E_{z ~ q_j}[log q_i(z)] for every (i, j)
    cross = -0.5 * (
        np.log(2.0 * np.pi * var)[:, None, :]
        + (var[None, :, :] + (mu[None, :, :] - mu[:, None, :]) ** 2) / var[:, None, :]
    ).sum(axis=2)
    return float(own - cross.mean())


def aggregate_kl_quadrature(mu: np.ndarray, var: np.ndarray, points: int = 20001) -> float:
    """E_i[KL(q_i || q_bar)] for 1-d Gaussian posteriors by trapezoidal quadrature."""
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    var = np.asarray(var, dtype=np.float64).reshape(-1)
    sd = np.sqrt(var)
    grid = np.linspace((mu - 12 * sd).min(), (mu + 12 * sd).max(), points)
    log_q = -0.5 * (LOG_2PI + np.log(var)[:, None] + (grid[None, :] - mu[:, None]) ** 2 / var[:, None])
    log_qbar = logsumexp(log_q, axis=0) - np.log(mu.size)
    integrand = np.exp(log_q) * (log_q - log_qbar[None, :])
    return float(trapezoid(integrand, grid, axis=1).mean())


def average_posterior_variance(model: EncoderDecoder, batch) -> np.ndarray:
    _, var = encode(model, batch)
    avg = var.mean(axis=0)
    logger.debug(f"Average posterior variance: {np.round(avg, 6).tolist()}")
    return avg

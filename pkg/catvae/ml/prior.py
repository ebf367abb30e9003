"""Step-2 priors over the latent space: diagonal Gaussian mixtures fitted by EM, or Gaussian KDE."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from loguru import logger
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus

from catvae.core.errors import DataError, StateError
from catvae.core.persistence import read_weight_file, write_weight_file
from catvae.ml.autodiff import ParamStore
from catvae.ml.model import LOG_2PI, LatentBatch

Latents = Union[LatentBatch, np.ndarray]


@dataclass
class PriorModel:
    """A KDE is stored as an equal-weight mixture centred on its support points."""

    kind: Literal["gmm", "kde"] = "gmm"
    weights: Optional[np.ndarray] = None
    means: Optional[np.ndarray] = None
    variances: Optional[np.ndarray] = None
    bandwidth: Optional[np.ndarray] = None
    log_likelihood_trace: List[float] = field(default_factory=list)

    KIND = "prior"

    @property
    def fitted(self) -> bool:
        return self.weights is not None and self.means is not None and self.variances is not None

    @property
    def support(self) -> Optional[np.ndarray]:
        return self.means if self.kind == "kde" else None

    @property
    def components(self) -> int:
        self._require_fitted()
        return self.weights.size

    @property
    def latent_dim(self) -> int:
        self._require_fitted()
        return self.means.shape[1]

    def _require_fitted(self) -> None:
        if not self.fitted:
            raise StateError("Prior has not been fitted")

    def moments(self) -> Tuple[np.ndarray, np.ndarray]:
        """Mean vector and full covariance matrix of the mixture."""
        self._require_fitted()
        mean = self.weights @ self.means
        second = np.einsum("k,ki,kj->ij", self.weights, self.means, self.means) + np.diag(
            self.weights @ self.variances
        )
        return mean, second - np.outer(mean, mean)

    def save(self, path: Path, schema_hash: str) -> None:
        self._require_fitted()
        k, d = self.means.shape
        store = ParamStore([("weights", (k,)), ("means", (k, d)), ("variances", (k, d))])
        store.view("weights")[...] = self.weights
        store.view("means")[...] = self.means
        store.view("variances")[...] = self.variances
        meta = {
            "prior_kind": self.kind,
            "bandwidth": None if self.bandwidth is None else self.bandwidth.tolist(),
            "log_likelihood_trace": self.log_likelihood_trace,
        }
        write_weight_file(path, self.KIND, schema_hash, store.directory(), store.vector, meta=meta)

    @classmethod
    def load(cls, path: Path, schema_hash: Optional[str] = None) -> "PriorModel":
        directory, values = read_weight_file(path, cls.KIND, schema_hash)
        store = ParamStore.from_directory(directory["slices"], values)
        meta = directory["meta"]
        bandwidth = meta.get("bandwidth")
        return cls(
            kind=meta["prior_kind"],
            weights=store.view("weights").copy(),
            means=store.view("means").copy(),
            variances=store.view("variances").copy(),
            bandwidth=None if bandwidth is None else np.asarray(bandwidth, dtype=np.float64),
            log_likelihood_trace=list(meta.get("log_likelihood_trace", [])),
        )


def _points(z: Latents) -> np.ndarray:
    z = z.z if isinstance(z, LatentBatch) else z
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] == 0:
        raise DataError(f"Latent samples must be a non-empty n x d matrix, got shape {z.shape}")
    return z


def _component_logpdf(z: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """n x K matrix of diagonal Gaussian log-densities."""
    diff = z[:, None, :] - means[None, :, :]
    return -0.5 * (LOG_2PI + np.log(variances)[None, :, :] + diff**2 / variances[None, :, :]).sum(axis=2)


def mixture_logpdf(
    z: np.ndarray, weights: np.ndarray, means: np.ndarray, variances: np.ndarray, chunk: int = 1024
) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    out = np.empty(z.shape[0])
    for start in range(0, z.shape[0], chunk):
        block = _component_logpdf(z[start : start + chunk], means, variances) + log_w[None, :]
        out[start : start + chunk] = logsumexp(block, axis=1)
    return out


def _floor_variances(variances: np.ndarray, floor: float) -> np.ndarray:
    collapsed = variances < floor
    if collapsed.any():
        comps = np.flatnonzero(collapsed.any(axis=1)).tolist()
        logger.warning(f"Collapsed mixture components {comps}; variance floor {floor} applied")
    return np.maximum(variances, floor)


def fit_gmm(
    z: Latents,
    components: int = 10,
    seed: int = 0,
    max_iters: int = 200,
    tol: float = 1e-6,
    variance_floor: float = 1e-6,
) -> PriorModel:
    """EM for a diagonal-covariance Gaussian mixture, seeded k-means++ initialization.

    Stops when the mean log-likelihood improves by less than `tol` or after
    `max_iters` E-steps. The per-iteration log-likelihood is kept on the model.
    """
    x = _points(z)
    n, d = x.shape
    if n < components:
        raise DataError(f"GMM with {components} components needs at least {components} points, got {n}")
    centers, _ = kmeans_plusplus(x, n_clusters=components, random_state=seed)
    weights = np.full(components, 1.0 / components)
    means = centers.astype(np.float64)
    variances = _floor_variances(np.tile(x.var(axis=0), (components, 1)), variance_floor)

    trace: List[float] = []
    for it in range(max_iters):
        joint = _component_logpdf(x, means, variances) + np.log(weights)[None, :]
        norm = logsumexp(joint, axis=1)
        ll = float(norm.mean())
        trace.append(ll)
        logger.debug(f"EM iteration {it}: mean log-likelihood {ll:.8f}")
        if len(trace) > 1 and ll - trace[-2] < tol:
            break
        resp = np.exp(joint - norm[:, None])
        nk = np.maximum(resp.sum(axis=0), np.finfo(np.float64).tiny)
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        diff2 = (x[:, None, :] - means[None, :, :]) ** 2
        variances = _floor_variances(np.einsum("nk,nkd->kd", resp, diff2) / nk[:, None], variance_floor)
    logger.info(f"Fitted {components}-component GMM in {len(trace)} iterations; log-likelihood {trace[-1]:.6f}")
    return PriorModel("gmm", weights, means, variances, log_likelihood_trace=trace)


def silverman_bandwidth(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    sd = x.std(axis=0, ddof=1) if n > 1 else np.zeros(x.shape[1])
    return 1.06 * sd * n ** (-0.2)


def fit_kde(z: Latents, bandwidth: Union[Literal["auto"], float] = "auto", bandwidth_floor: float = 1e-3) -> PriorModel:
    """Gaussian product-kernel density; per-dimension Silverman bandwidth when auto."""
    x = _points(z)
    n, d = x.shape
    if bandwidth == "auto":
        h = silverman_bandwidth(x)
    else:
        if float(bandwidth) <= 0:
            raise DataError(f"KDE bandwidth must be positive, got {bandwidth}")
        h = np.full(d, float(bandwidth))
    if (h < bandwidth_floor).any():
        logger.warning(f"KDE bandwidth {h.tolist()} below floor in some dimension; floor {bandwidth_floor} applied")
        h = np.maximum(h, bandwidth_floor)
    return PriorModel(
        "kde",
        weights=np.full(n, 1.0 / n),
        means=x.copy(),
        variances=np.tile(h**2, (n, 1)),
        bandwidth=h,
    )


def standard_normal_prior(d: int) -> PriorModel:
    return PriorModel("gmm", np.ones(1), np.zeros((1, d)), np.ones((1, d)))


def prior_logpdf(model: PriorModel, z) -> Union[float, np.ndarray]:
    """Log density at one row (scalar) or at every row of a matrix."""
    model._require_fitted()
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    rows = np.atleast_2d(z)
    if rows.shape[1] != model.latent_dim:
        raise StateError(f"Prior has latent dimension {model.latent_dim}, got {rows.shape[1]}")
    out = mixture_logpdf(rows, model.weights, model.means, model.variances)
    return float(out[0]) if single else out


def sample_prior(model: PriorModel, count: int, seed: int = 0) -> LatentBatch:
    """Ancestral sampling: component first, then its Gaussian."""
    model._require_fitted()
    rng = np.random.default_rng(seed)
    comp = rng.choice(model.components, size=count, p=model.weights)
    eps = rng.standard_normal((count, model.latent_dim))
    mu, var = model.means[comp], model.variances[comp]
    return LatentBatch(mu + np.sqrt(var) * eps, eps, mu, var)


def aggregate_kl_estimate(
    model: PriorModel, mu: np.ndarray, var: np.ndarray, draws: int = 10_000, seed: int = 0
) -> float:
    """Monte-Carlo KL(q_bar || prior), q_bar the equal-weight mixture of the posteriors."""
    model._require_fitted()
    mu = np.asarray(mu, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, mu.shape[0], size=draws)
    z = mu[rows] + np.sqrt(var[rows]) * rng.standard_normal((draws, mu.shape[1]))
    log_qbar = mixture_logpdf(z, np.full(mu.shape[0], 1.0 / mu.shape[0]), mu, var)
    return float(np.mean(log_qbar - prior_logpdf(model, z)))

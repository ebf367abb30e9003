from typing import NamedTuple

import numpy as np
from loguru import logger

from catvae.core.errors import DataError
from catvae.ml.model import LatentBatch


class Projection(NamedTuple):
    scores: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    mean: np.ndarray


def pca_project(z, components: int = 2) -> Projection:
    """PCA by eigen-decomposition of the sample covariance.

    Components are ordered by decreasing variance, and each is signed so its
    largest-magnitude loading is positive.
    """
    z = z.z if isinstance(z, LatentBatch) else z
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2:
        raise DataError(f"PCA needs an n x d matrix with n >= 2, got shape {z.shape}")
    if components > z.shape[1]:
        logger.warning(f"Requested {components} components from {z.shape[1]} dimensions; using {z.shape[1]}")
        components = z.shape[1]
    mean = z.mean(axis=0)
    centered = z - mean
    eigvals, eigvecs = np.linalg.eigh(np.cov(centered, rowvar=False).reshape(z.shape[1], z.shape[1]))
    order = np.argsort(eigvals)[::-1][:components]
    vecs = eigvecs[:, order]
    pivot = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    return Projection(centered @ vecs, vecs.T, np.maximum(eigvals[order], 0.0), mean)

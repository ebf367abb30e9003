"""Cramer-Wold distance between point sets, smoothed with a Gaussian of variance kappa.

    cw(X, Y) = 1 / (2 sqrt(pi kappa)) * [ mean_{i,i'} phi_p(|x_i - x_i'|^2 / 4kappa)
                                        + mean_{j,j'} phi_p(|y_j - y_j'|^2 / 4kappa)
                                        - 2 mean_{i,j} phi_p(|x_i - y_j|^2 / 4kappa) ]

with phi_p(s) = 1F1(1/2; p/2; -s). `cw_distance_mc` evaluates the same
sphere integral by sampling directions and is used as an oracle.
"""
from typing import Literal, Optional

import numpy as np
from scipy.special import hyp1f1

from catvae.core.errors import DataError
from catvae.ml import autodiff as ad
from catvae.ml.autodiff import Node, lift
from catvae.schemas.config import CwConfig

KernelMode = Literal["exact_series", "asymptotic", "auto"]


def auto_bandwidth(n: int, m: int) -> float:
    return (4.0 / (3.0 * min(n, m))) ** 0.4


def resolve_kappa(cfg: CwConfig, n: int, m: int) -> float:
    kappa = auto_bandwidth(n, m) if cfg.kappa == "auto" else float(cfg.kappa)
    if kappa <= 0:
        raise DataError(f"kappa must be positive, got {kappa}")
    return kappa


def _resolve_mode(mode: KernelMode, p: int, switch_dimension: int) -> str:
    if mode == "auto":
        return "exact_series" if p < switch_dimension else "asymptotic"
    return mode


def phi_kernel(s, p: int, mode: KernelMode = "auto", switch_dimension: int = 20):
    s = np.asarray(s, dtype=np.float64)
    if (s < 0).any():
        raise DataError("phi_kernel is defined for s >= 0")
    if p < 1:
        raise DataError(f"Dimension must be positive, got {p}")
    if _resolve_mode(mode, p, switch_dimension) == "exact_series":
        out = hyp1f1(0.5, p / 2.0, -s)
    else:
        out = (1.0 + 4.0 * s / (2.0 * p - 3.0)) ** -0.5
    return float(out) if out.ndim == 0 else out


def phi_kernel_derivative(s, p: int, mode: KernelMode = "auto", switch_dimension: int = 20) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if _resolve_mode(mode, p, switch_dimension) == "exact_series":
        return -(1.0 / p) * hyp1f1(1.5, p / 2.0 + 1.0, -s)
    c = 4.0 / (2.0 * p - 3.0)
    return -0.5 * c * (1.0 + c * s) ** -1.5


def _squared_distances(A: Node, B: Node) -> Node:
    n, m = A.shape[0], B.shape[0]
    aa = (A * A).sum(axis=1).reshape(n, 1)
    bb = (B * B).sum(axis=1).reshape(1, m)
    return ad.maximum(aa + bb - 2.0 * (A @ B.T), 0.0)


def _kernel_mean(A: Node, B: Node, p: int, kappa: float, mode: str, switch: int) -> Node:
    s = _squared_distances(A, B) * (1.0 / (4.0 * kappa))
    k = ad.elementwise(
        s,
        lambda v: phi_kernel(np.maximum(v, 0.0), p, mode, switch),
        lambda v: phi_kernel_derivative(np.maximum(v, 0.0), p, mode, switch),
    )
    return k.mean()


@lift
def cw_distance(X, Y, cfg: Optional[CwConfig] = None):
    """Closed-form Cramer-Wold distance; differentiable in both point sets."""
    cfg = cfg or CwConfig()
    tape = Y.tape if isinstance(Y, Node) else X.tape
    X, Y = tape.lift(X), tape.lift(Y)
    if X.value.ndim != 2 or Y.value.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise DataError(f"Cramer-Wold distance needs equal widths, got {X.shape} and {Y.shape}")
    n, p = X.shape
    m = Y.shape[0]
    if n < 1 or m < 1:
        raise DataError("Cramer-Wold distance needs non-empty point sets")
    kappa = resolve_kappa(cfg, n, m)
    mode = _resolve_mode(cfg.kernel_mode, p, cfg.switch_dimension)
    kxx = _kernel_mean(X, X, p, kappa, mode, cfg.switch_dimension)
    kyy = _kernel_mean(Y, Y, p, kappa, mode, cfg.switch_dimension)
    kxy = _kernel_mean(X, Y, p, kappa, mode, cfg.switch_dimension)
    return (kxx + kyy - 2.0 * kxy) * (1.0 / (2.0 * np.sqrt(np.pi * kappa)))


def _smoothed_overlap(a: np.ndarray, b: np.ndarray, kappa: float) -> np.ndarray:
    """Per projection: mean over pairs of the integral of N(a_i, kappa) * N(b_j, kappa)."""
    delta = a[:, None, :] - b[None, :, :]
    return (np.exp(-(delta**2) / (4.0 * kappa)) / np.sqrt(4.0 * np.pi * kappa)).mean(axis=(0, 1))


def cw_distance_mc(
    X: np.ndarray, Y: np.ndarray, cfg: Optional[CwConfig] = None, chunk: int = 64
) -> float:
    """Monte-Carlo slicing: average of the 1-d smoothed L2 distance over random directions."""
    cfg = cfg or CwConfig()
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise DataError(f"Cramer-Wold distance needs equal widths, got {X.shape} and {Y.shape}")
    kappa = resolve_kappa(cfg, X.shape[0], Y.shape[0])
    rng = np.random.default_rng(cfg.seed)
    total = 0.0
    remaining = cfg.mc_projections
    while remaining > 0:
        size = min(chunk, remaining)
        v = rng.standard_normal((X.shape[1], size))
        v /= np.linalg.norm(v, axis=0, keepdims=True)
        rx, ry = X @ v, Y @ v
        sliced = _smoothed_overlap(rx, rx, kappa) + _smoothed_overlap(ry, ry, kappa) - 2.0 * _smoothed_overlap(rx, ry, kappa)
        total += sliced.sum()
        remaining -= size
    return float(total / cfg.mc_projections)

import time
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from catvae.core.errors import DataError, NonFiniteLossError, StateError
from catvae.ml import autodiff as ad
from catvae.ml.autodiff import Node, Tape
from catvae.ml.classifier import ClassifierBank, classification_regularizer
from catvae.ml.cramer_wold import cw_distance, resolve_kappa
from catvae.ml.data import CategoricalDataset, to_onehot
from catvae.ml.model import (
    EncoderDecoder,
    LatentBatch,
    average_posterior_variance,
    cross_entropy,
    encode,
    entropy_reg_estimate,
    reparameterize,
    reparameterize_nodes,
    vae_kl,
)
from catvae.ml.optim import AdamOptimizer
from catvae.schemas.config import Step1Config
from catvae.schemas.reports import EpochTrace, TrainReport


def enabled_terms(cfg: Step1Config) -> List[str]:
    terms = ["recon"]
    if cfg.use_entropy_reg:
        terms.append("entropy_reg")
    if cfg.use_vae_kl:
        terms.append("vae_kl")
    if cfg.lambda_cw > 0:
        terms.append("cw")
    if cfg.gamma > 0:
        terms.append("classifier")
    return terms


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Shuffled index batches; a trailing batch of one row joins the previous batch."""
    order = rng.permutation(n)
    batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and batches[-1].size == 1:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


def step1_loss_terms(
    model: EncoderDecoder,
    tape: Tape,
    x: np.ndarray,
    eps: np.ndarray,
    cfg: Step1Config,
    bank: Optional[ClassifierBank] = None,
    cw_cfg=None,
) -> Dict[str, Node]:
    """Weighted terms of the step-1 objective for one minibatch, recorded on `tape`."""
    mu, var = model.encoder(tape, x)
    z = reparameterize_nodes(mu, var, eps)
    log_probs = model.decoder(tape, z)
    terms = {"recon": cross_entropy(x, log_probs)}
    if cfg.use_entropy_reg:
        terms["entropy_reg"] = entropy_reg_estimate(mu, var, z)
    if cfg.use_vae_kl:
        terms["vae_kl"] = vae_kl(mu, var)
    if cfg.lambda_cw > 0 or cfg.gamma > 0:
        probs = ad.exp(log_probs)
        if cfg.lambda_cw > 0:
            terms["cw"] = cw_distance(x, probs, cw_cfg or cfg.cw) * cfg.lambda_cw
        if cfg.gamma > 0:
            terms["classifier"] = classification_regularizer(bank, probs) * cfg.gamma
    return terms


def train_step1(
    ds_train: CategoricalDataset,
    bank: Optional[ClassifierBank],
    cfg: Step1Config,
    holdout: Optional[CategoricalDataset] = None,
) -> Tuple[EncoderDecoder, TrainReport]:
    """Minimize the step-1 objective by minibatch Adam.

    Per batch: recon + entropy_reg + vae_kl + lambda * cw + gamma * classifier,
    with each term present only when enabled. Reported epoch values are the
    row-weighted means of the weighted terms; their sum is the reported total.
    """
    if cfg.gamma > 0:
        if bank is None or not bank.frozen:
            raise StateError("gamma > 0 requires a pre-trained classifier bank")
        if not bank.schema.compatible_with(ds_train.schema):
            raise DataError("Classifier bank schema does not match the training data")
    n = ds_train.n
    needs_pairs = cfg.use_entropy_reg or cfg.lambda_cw > 0
    if n == 0 or (needs_pairs and n < 2):
        raise DataError(f"Training needs at least {2 if needs_pairs else 1} rows, got {n}")

    started = time.perf_counter()
    model = EncoderDecoder.from_config(ds_train.schema, cfg)
    x_all = to_onehot(ds_train).values
    cw_cfg, kappa = None, None
    if cfg.lambda_cw > 0:
        size = min(cfg.batch_size, n)
        kappa = resolve_kappa(cfg.cw, size, size)
        cw_cfg = cfg.cw.model_copy(update={"kappa": kappa})
        logger.info(f"Cramer-Wold bandwidth kappa={kappa:.6g} for batch size {size}")

    optimizer = AdamOptimizer(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    rng = np.random.default_rng(cfg.seed)
    names = enabled_terms(cfg)
    report = TrainReport(seed=cfg.seed, terms=names, kappa=kappa, config=cfg)

    for epoch in range(1, cfg.epochs + 1):
        sums = dict.fromkeys(names, 0.0)
        for step, rows in enumerate(minibatches(n, cfg.batch_size, rng)):
            x = x_all[rows]
            eps = rng.standard_normal((rows.size, cfg.latent_dim))
            tape = Tape(model.params)
            terms = step1_loss_terms(model, tape, x, eps, cfg, bank, cw_cfg)
            total = None
            for name, node in terms.items():
                value = float(node.value)
                if not np.isfinite(value):
                    raise NonFiniteLossError(name, value, epoch, step)
                sums[name] += value * rows.size
                total = node if total is None else total + node
            optimizer.step(tape.backward(total).params)
        values = {name: s / n for name, s in sums.items()}
        trace = EpochTrace(epoch=epoch, terms=values, total=sum(values.values()))
        report.epochs.append(trace)
        logger.info(
            f"Epoch {epoch}/{cfg.epochs}: total {trace.total:.6f} "
            + " ".join(f"{k}={v:.6f}" for k, v in values.items())
        )

    held = holdout if holdout is not None else ds_train
    report.avg_posterior_variance = average_posterior_variance(model, to_onehot(held)).tolist()
    report.wall_time_seconds = time.perf_counter() - started
    logger.info(
        f"Step 1 finished in {report.wall_time_seconds:.1f}s; "
        f"avg posterior variance {np.round(report.avg_posterior_variance, 6).tolist()}"
    )
    return model, report


def aggregate_posterior_sample(
    model: EncoderDecoder, ds: CategoricalDataset, draws_per_row: int = 1, seed: int = 0
) -> LatentBatch:
    """`draws_per_row` reparameterized draws per row, rows kept in dataset order."""
    if draws_per_row < 1:
        raise DataError(f"draws_per_row must be positive, got {draws_per_row}")
    mu, var = encode(model, to_onehot(ds))
    mu = np.repeat(mu, draws_per_row, axis=0)
    var = np.repeat(var, draws_per_row, axis=0)
    return reparameterize(mu, var, seed, model.variance_floor)

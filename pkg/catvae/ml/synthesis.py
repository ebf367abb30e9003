from typing import Literal

from loguru import logger

from catvae.core.errors import DataError, StateError
from catvae.ml.data import CategoricalDataset, from_onehot
from catvae.ml.model import EncoderDecoder, decode
from catvae.ml.prior import PriorModel, sample_prior


def generate(
    model: EncoderDecoder,
    prior: PriorModel,
    count: int,
    seed: int = 0,
    mode: Literal["sample", "argmax"] = "sample",
) -> CategoricalDataset:
    """Draw z from the prior, decode to block PMFs, then pick levels."""
    if count < 1:
        raise DataError(f"count must be positive, got {count}")
    if prior.latent_dim != model.latent_dim:
        raise StateError(f"Prior latent dimension {prior.latent_dim} does not match the model's {model.latent_dim}")
    latents = sample_prior(prior, count, seed)
    probs = decode(model, latents)
    # level draws get their own stream so argmax and sample modes see the same z
    synth = from_onehot(probs, mode=mode, seed=seed + 1)
    logger.info(f"Generated {count} rows in {mode} mode")
    return synth

from pathlib import Path
from typing import Optional, Tuple

import pandas as pd
from loguru import logger

from catvae.controllers.artifacts import ArtifactStore, resolve_bank_path
from catvae.core.config import Settings
from catvae.ml.classifier import ClassifierBank
from catvae.ml.data import load_csv
from catvae.ml.model import EncoderDecoder
from catvae.ml.prior import PriorModel, fit_gmm, fit_kde
from catvae.ml.trainer import aggregate_posterior_sample, train_step1
from catvae.schemas.reports import TrainReport


class TrainingController:
    """Step 1 (encoder/decoder) followed by step 2 (prior), persisted to one run directory."""

    def __init__(self, settings: Settings):
        self.settings = settings

    def fit(
        self,
        data: Path,
        out: Path,
        classifier_bank: Optional[Path] = None,
        test: Optional[Path] = None,
    ) -> Tuple[EncoderDecoder, PriorModel, TrainReport]:
        step1, prior_cfg = self.settings.step1, self.settings.prior
        ds = load_csv(data)
        holdout = load_csv(test, schema=ds.schema) if test is not None else None
        bank = None
        if classifier_bank is not None:
            bank = ClassifierBank.load(resolve_bank_path(classifier_bank), ds.schema)
        elif step1.gamma > 0:
            logger.warning("gamma > 0 without --classifier-bank; training will be refused")

        model, report = train_step1(ds, bank if step1.gamma > 0 else None, step1, holdout=holdout)

        latents = aggregate_posterior_sample(model, ds, prior_cfg.draws_per_row, prior_cfg.seed)
        if prior_cfg.kind == "gmm":
            prior = fit_gmm(
                latents,
                components=prior_cfg.components,
                seed=prior_cfg.seed,
                max_iters=prior_cfg.max_iters,
                tol=prior_cfg.tol,
                variance_floor=prior_cfg.variance_floor,
            )
        else:
            prior = fit_kde(latents, prior_cfg.bandwidth)

        store = ArtifactStore(out).ensure()
        store.save_schema(ds.schema)
        model.save(store.path(ArtifactStore.MODEL))
        prior.save(store.path(ArtifactStore.PRIOR), ds.schema.fingerprint())
        store.write_text(ArtifactStore.TRAIN_REPORT, report.model_dump_json(indent=2))
        trace = pd.DataFrame([{"epoch": e.epoch, **e.terms, "total": e.total} for e in report.epochs])
        trace.to_csv(store.path(ArtifactStore.TRACE), index=False, lineterminator="\n")
        store.save_json(
            ArtifactStore.MANIFEST,
            {"n_train": ds.n, "latent_dim": model.latent_dim, "prior_kind": prior.kind, "seed": self.settings.seed},
        )
        logger.info(f"Fit complete: artifacts in {store.root}")
        return model, prior, report

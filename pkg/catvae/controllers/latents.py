from pathlib import Path

import pandas as pd
from loguru import logger

from catvae.controllers.artifacts import ArtifactStore
from catvae.core.config import Settings
from catvae.ml.data import load_csv
from catvae.ml.model import EncoderDecoder
from catvae.ml.projection import pca_project
from catvae.ml.trainer import aggregate_posterior_sample


class LatentController:
    def __init__(self, settings: Settings):
        self.settings = settings

    def latent_dump(self, model_dir: Path, data: Path, out: Path) -> pd.DataFrame:
        """PCA-projected aggregated-posterior samples as CSV, raw latents alongside."""
        store = ArtifactStore(model_dir)
        schema = store.load_schema()
        model = EncoderDecoder.load(store.path(ArtifactStore.MODEL), schema)
        ds = load_csv(data, schema=schema)
        cfg = self.settings.prior
        latents = aggregate_posterior_sample(model, ds, cfg.draws_per_row, cfg.seed)
        projection = pca_project(latents, components=2)
        frame = pd.DataFrame(projection.scores, columns=[f"pc{k + 1}" for k in range(projection.scores.shape[1])])
        for k in range(latents.d):
            frame[f"z{k + 1}"] = latents.z[:, k]
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False, lineterminator="\n")
        logger.info(f"Latent dump ({len(frame)} rows), explained variance {projection.explained_variance.tolist()}")
        return frame

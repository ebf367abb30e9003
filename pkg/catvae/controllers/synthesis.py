from pathlib import Path
from typing import Optional

from loguru import logger

from catvae.controllers.artifacts import ArtifactStore
from catvae.core.config import Settings
from catvae.ml.data import CategoricalDataset, save_csv
from catvae.ml.model import EncoderDecoder
from catvae.ml.prior import PriorModel
from catvae.ml.synthesis import generate


class SynthesisController:
    def __init__(self, settings: Settings):
        self.settings = settings

    def sample(self, model_dir: Path, out: Path, count: Optional[int] = None) -> CategoricalDataset:
        """Generate `count` rows; defaults to the size of the training set."""
        cfg = self.settings.synthesis
        store = ArtifactStore(model_dir)
        schema = store.load_schema()
        model = EncoderDecoder.load(store.path(ArtifactStore.MODEL), schema)
        prior = PriorModel.load(store.path(ArtifactStore.PRIOR), schema.fingerprint())
        count = count or cfg.count or int(store.load_json(ArtifactStore.MANIFEST)["n_train"])
        synth = generate(model, prior, count, seed=cfg.seed, mode=cfg.mode)
        save_csv(synth, out)
        logger.info(f"Wrote {synth.n} synthetic rows to {out}")
        return synth

from pathlib import Path

from loguru import logger

from catvae.controllers.artifacts import ArtifactStore
from catvae.core.config import Settings
from catvae.ml.classifier import ClassifierBank, accuracy, pretrain
from catvae.ml.data import load_csv


class ClassifierController:
    def __init__(self, settings: Settings):
        self.settings = settings

    def pretrain_classifiers(self, data: Path, out: Path) -> ClassifierBank:
        cfg = self.settings.classifier
        ds = load_csv(data)
        bank = pretrain(
            ClassifierBank(ds.schema),
            ds,
            epochs=cfg.epochs,
            learning_rate=cfg.learning_rate,
            seed=cfg.seed,
            batch_size=cfg.batch_size,
        )
        store = ArtifactStore(out)
        store.save_schema(ds.schema)
        bank.save(store.path(ArtifactStore.BANK))
        store.save_json("bank_report.json", {"train_accuracy": accuracy(bank, ds).tolist(), "seed": cfg.seed})
        logger.info(f"Classifier bank written to {store.path(ArtifactStore.BANK)}")
        return bank

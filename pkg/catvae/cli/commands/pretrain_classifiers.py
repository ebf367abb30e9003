from catvae.cli.commands.common import ConfigOption, DataOption, OutOption, SeedOption, prepare
from catvae.controllers.classifiers import ClassifierController


def pretrain_classifiers(data: DataOption, out: OutOption, config: ConfigOption = None, seed: SeedOption = None) -> None:
    """Pre-train the per-column classifier bank and write it to OUT."""
    settings = prepare(config, seed)
    ClassifierController(settings).pretrain_classifiers(data, out)

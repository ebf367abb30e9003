from pathlib import Path
from typing import Annotated, Optional

import typer

from catvae.cli.commands.common import ConfigOption, DataOption, OutOption, SeedOption, prepare
from catvae.controllers.training import TrainingController


def fit(
    data: DataOption,
    out: OutOption,
    config: ConfigOption = None,
    seed: SeedOption = None,
    classifier_bank: Annotated[Optional[Path], typer.Option("--classifier-bank", help="Pre-trained bank file or directory.")] = None,
    test: Annotated[Optional[Path], typer.Option("--test", help="Held-out CSV for the posterior-variance diagnostic.")] = None,
    lambda_: Annotated[Optional[float], typer.Option("--lambda", help="Cramer-Wold weight.")] = None,
    gamma: Annotated[Optional[float], typer.Option("--gamma", help="Classifier regularizer weight.")] = None,
    latent_dim: Annotated[Optional[int], typer.Option("--latent-dim")] = None,
    epochs: Annotated[Optional[int], typer.Option("--epochs")] = None,
    no_entropy_reg: Annotated[bool, typer.Option("--no-entropy-reg", help="Drop the entropy regularization term.")] = False,
) -> None:
    """Step 1 then step 2; writes model, prior and train report to OUT."""
    step1 = {"lambda_cw": lambda_, "gamma": gamma, "latent_dim": latent_dim, "epochs": epochs}
    step1 = {k: v for k, v in step1.items() if v is not None}
    if no_entropy_reg:
        step1["use_entropy_reg"] = False
    settings = prepare(config, seed, {"step1": step1})
    TrainingController(settings).fit(data, out, classifier_bank=classifier_bank, test=test)

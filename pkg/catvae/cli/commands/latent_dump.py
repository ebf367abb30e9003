from pathlib import Path
from typing import Annotated

import typer

from catvae.cli.commands.common import ConfigOption, DataOption, OutOption, SeedOption, prepare
from catvae.controllers.latents import LatentController


def latent_dump(
    model: Annotated[Path, typer.Option("--model", help="Run directory written by `fit`.")],
    data: DataOption,
    out: OutOption,
    config: ConfigOption = None,
    seed: SeedOption = None,
) -> None:
    """Write PCA-projected aggregated-posterior samples as CSV."""
    settings = prepare(config, seed)
    LatentController(settings).latent_dump(model, data, out)

from pathlib import Path
from typing import Annotated, Optional

import typer

from catvae.cli.commands.common import ConfigOption, OutOption, SeedOption, prepare
from catvae.controllers.synthesis import SynthesisController


def sample(
    model: Annotated[Path, typer.Option("--model", help="Run directory written by `fit`.")],
    out: OutOption,
    count: Annotated[Optional[int], typer.Option("--count", help="Rows to generate; defaults to the training size.")] = None,
    config: ConfigOption = None,
    seed: SeedOption = None,
) -> None:
    """Generate a synthetic CSV from a fitted model and prior."""
    settings = prepare(config, seed)
    SynthesisController(settings).sample(model, out, count)

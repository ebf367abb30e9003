from typing import Annotated

import typer

from catvae.cli.commands.common import ConfigOption, OutOption, SeedOption, prepare
from catvae.controllers.toy_data import ToyDataController


def toy_data(
    out: OutOption,
    count: Annotated[int, typer.Option("--count", min=2)] = 5000,
    test_fraction: Annotated[float, typer.Option("--test-fraction", min=0.0, max=1.0)] = 0.2,
    config: ConfigOption = None,
    seed: SeedOption = None,
) -> None:
    """Write the chain Bayes-net benchmark as OUT/train.csv and OUT/test.csv."""
    settings = prepare(config, seed)
    ToyDataController().write(out, count, settings.seed, test_fraction)

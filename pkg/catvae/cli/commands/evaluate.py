from pathlib import Path
from typing import Annotated, List

import typer

from catvae.cli.commands.common import ConfigOption, DataOption, OutOption, SeedOption, prepare
from catvae.controllers.evaluation import EvaluationController


def evaluate(
    data: DataOption,
    test: Annotated[Path, typer.Option("--test", help="Real test CSV.")],
    synth: Annotated[List[Path], typer.Option("--synth", help="Synthetic CSV; repeat to rank several systems.")],
    out: OutOption,
    config: ConfigOption = None,
    seed: SeedOption = None,
) -> None:
    """Score synthetic datasets and write metrics.json / metrics.csv to OUT."""
    settings = prepare(config, seed)
    EvaluationController(settings).evaluate(data, test, synth, out)

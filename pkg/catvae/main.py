import sys
from typing import List, Optional

import click
import typer
from loguru import logger

from catvae.cli.commands import evaluate, fit, latent_dump, pretrain_classifiers, sample, toy_data
from catvae.core.errors import CatVAEError

app = typer.Typer(name="catvae", help="Two-step categorical VAE synthesizer.", add_completion=False, no_args_is_help=True)

app.command("pretrain-classifiers")(pretrain_classifiers.pretrain_classifiers)
app.command("fit")(fit.fit)
app.command("sample")(sample.sample)
app.command("evaluate")(evaluate.evaluate)
app.command("latent-dump")(latent_dump.latent_dump)
app.command("toy-data")(toy_data.toy_data)


def run(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code: 0 ok, 1 usage/config, 2 data/state, 3 numeric."""
    try:
        result = app(args=argv, prog_name="catvae", standalone_mode=False)
    except click.exceptions.Abort:
        logger.error("Aborted")
        return 1
    except click.ClickException as exc:
        logger.error(f"Usage error: {exc.format_message()}")
        return 1
    except CatVAEError as exc:
        logger.error(f"{type(exc).__name__}: {exc.detail}")
        return exc.exit_code
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

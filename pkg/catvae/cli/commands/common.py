from pathlib import Path
from typing import Annotated, Any, Dict, Optional

import typer

from catvae.core.config import Settings, load_settings
from catvae.core.logging import configure_logging

ConfigOption = Annotated[Optional[Path], typer.Option("--config", help="TOML config file.")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", help="Global seed; overrides every stage seed.")]
DataOption = Annotated[Path, typer.Option("--data", help="Training CSV (header row required).")]
OutOption = Annotated[Path, typer.Option("--out", help="Output path.")]


def prepare(config: Optional[Path], seed: Optional[int], overrides: Optional[Dict[str, Any]] = None) -> Settings:
    """Resolve settings (flags > file > environment > defaults) and set up logging."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None and v != {}}
    if seed is not None:
        overrides["seed"] = seed
    settings = load_settings(config, overrides)
    configure_logging(settings.log_level, settings.log_json)
    return settings

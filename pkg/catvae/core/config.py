try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict, TomlConfigSettingsSource

from catvae.core.errors import ConfigError
from catvae.schemas.config import (
    ClassifierConfig,
    MetricsConfig,
    PriorConfig,
    Step1Config,
    SynthesisConfig,
)


class Settings(BaseSettings):
    log_level: str = "INFO"
    log_json: bool = False
    seed: int = 0
    step1: Step1Config = Field(default_factory=Step1Config)
    classifier: ClassifierConfig = Field(default_factory=ClassifierConfig)
    prior: PriorConfig = Field(default_factory=PriorConfig)
    synthesis: SynthesisConfig = Field(default_factory=SynthesisConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)

    model_config = SettingsConfigDict(
        env_prefix="CATVAE_",
        env_nested_delimiter="__",
        env_file="./.env",
        extra="ignore",
    )

    @model_validator(mode="after")
    def propagate_seed(self) -> "Settings":
        # stage seeds left unset in the file follow the global seed
        for stage in (self.step1, self.classifier, self.prior, self.synthesis, self.metrics):
            if "seed" not in stage.model_fields_set:
                stage.seed = self.seed
        if "seed" not in self.step1.cw.model_fields_set:
            self.step1.cw.seed = self.seed
        return self


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _drop_seeds(values: Dict[str, Any]) -> Dict[str, Any]:
    cleaned = {}
    for key, value in values.items():
        if key == "seed":
            continue
        cleaned[key] = _drop_seeds(value) if isinstance(value, dict) else value
    return cleaned


def load_settings(
    config_path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Settings:
    """Build settings with precedence flags > config file > environment > defaults.

    A `seed` override is global: it replaces every stage seed, including the
    ones pinned in the file.
    """
    values: Dict[str, Any] = {}
    if config_path is not None:
        if not Path(config_path).is_file():
            raise ConfigError(f"Config file not found: {config_path}")
        try:
            values = TomlConfigSettingsSource(Settings, toml_file=config_path)()
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"Cannot parse {config_path}: {exc}") from exc
    overrides = overrides or {}
    if "seed" in overrides:
        values = _drop_seeds(values)
    values = _deep_merge(values, overrides)
    try:
        return Settings(**values)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc

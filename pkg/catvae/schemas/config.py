from typing import List, Literal, Optional, Union

from pydantic import Field, model_validator

from catvae.schemas.base import ConfigModel


class CwConfig(ConfigModel):
    """Cramer-Wold distance settings. `kappa="auto"` picks a Silverman-style bandwidth."""

    kappa: Union[Literal["auto"], float] = "auto"
    kernel_mode: Literal["exact_series", "asymptotic", "auto"] = "auto"
    switch_dimension: int = Field(default=20, ge=2)
    mc_projections: int = Field(default=10_000, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def check_kappa(self) -> "CwConfig":
        if self.kappa != "auto" and self.kappa <= 0:
            raise ValueError("kappa must be positive or 'auto'")
        return self


class Step1Config(ConfigModel):
    latent_dim: int = Field(default=2, ge=1)
    hidden_sizes: List[int] = Field(default_factory=lambda: [64, 64])
    activation: Literal["relu", "tanh"] = "relu"
    epochs: int = Field(default=200, ge=1)
    batch_size: int = Field(default=256, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    lambda_cw: float = Field(default=0.0, ge=0)
    gamma: float = Field(default=0.0, ge=0)
    use_entropy_reg: bool = True
    use_vae_kl: bool = False
    variance_floor: float = Field(default=1e-8, gt=0)
    cw: CwConfig = Field(default_factory=CwConfig)
    seed: int = 0

    @model_validator(mode="after")
    def check_batch(self) -> "Step1Config":
        if self.batch_size < 2 and (self.use_entropy_reg or self.lambda_cw > 0):
            raise ValueError("batch_size must be at least 2 when the entropy term or the Cramer-Wold term is enabled")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        return self


class ClassifierConfig(ConfigModel):
    epochs: int = Field(default=30, ge=1)
    learning_rate: float = Field(default=1e-2, gt=0)
    batch_size: int = Field(default=256, ge=1)
    seed: int = 0


class PriorConfig(ConfigModel):
    kind: Literal["gmm", "kde"] = "gmm"
    components: int = Field(default=10, ge=1)
    max_iters: int = Field(default=200, ge=1)
    tol: float = Field(default=1e-6, gt=0)
    variance_floor: float = Field(default=1e-6, gt=0)
    bandwidth: Union[Literal["auto"], float] = "auto"
    draws_per_row: int = Field(default=1, ge=1)
    seed: int = 0


class SynthesisConfig(ConfigModel):
    mode: Literal["sample", "argmax"] = "sample"
    count: Optional[int] = Field(default=None, ge=1)
    seed: int = 0


class MetricsConfig(ConfigModel):
    log_cluster_groups: int = Field(default=20, ge=1)
    kmeans_max_iter: int = Field(default=50, ge=1)
    log_cluster_floor: float = Field(default=1e-8, gt=0)
    kl_smoothing: float = Field(default=1e-6, gt=0)
    var_pred_max_iter: int = Field(default=200, ge=1)
    var_pred_c: float = Field(default=1.0, gt=0)
    seed: int = 0

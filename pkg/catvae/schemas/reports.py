from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from catvae.schemas.config import Step1Config


class EpochTrace(BaseModel):
    epoch: int
    terms: Dict[str, float]
    total: float


class TrainReport(BaseModel):
    seed: int
    terms: List[str]
    epochs: List[EpochTrace] = []
    avg_posterior_variance: List[float] = []
    wall_time_seconds: float = 0.0
    kappa: Optional[float] = None
    config: Step1Config


class GradCheckReport(BaseModel):
    max_relative_error: float
    worst_coordinate: int
    coordinates_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


# name -> True when larger is better
METRIC_DIRECTIONS: Dict[str, bool] = {
    "KL": False,
    "KS": False,
    "Coverage": True,
    "DimProb": False,
    "PCD(P)": False,
    "PCD(K)": False,
    "log-cluster": False,
    "VarPred": False,
}

PRIVACY_METRICS = ("AA(train)", "AA(test)", "AA(privacy)")


class SystemMetrics(BaseModel):
    name: str
    values: Dict[str, Optional[float]] = {}
    missing: Dict[str, str] = {}
    breakdowns: Dict[str, List[Optional[float]]] = {}
    privacy: Dict[str, float] = {}


class MetricsReport(BaseModel):
    systems: List[SystemMetrics]
    ranks: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    average_rank: Dict[str, float] = Field(default_factory=dict)
    notes: List[str] = []

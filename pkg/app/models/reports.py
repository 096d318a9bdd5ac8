from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.models.table import ColumnKind


class CleaningReport(BaseModel):
    """Machine-readable record of the cleaning recipe"""
    rows_in: int
    rows_removed_gender: int
    columns_dropped: List[str] = Field(default_factory=list)
    race_recode_counts: Dict[str, int] = Field(default_factory=dict)
    rows_out: int
    rows_missing_by_column: Dict[str, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _rows_conserved(self) -> "CleaningReport":
        if self.rows_out != self.rows_in - self.rows_removed_gender:
            raise ValueError("rows_out must equal rows_in - rows_removed_gender")
        return self


class ColumnSummary(BaseModel):
    """Descriptive statistics of one column over its non-missing entries"""
    name: str
    kind: ColumnKind
    n: int
    n_missing: int
    min: Optional[float] = None
    q1: Optional[float] = None
    median: Optional[float] = None
    mean: Optional[float] = None
    q3: Optional[float] = None
    max: Optional[float] = None
    levels: Optional[Dict[str, int]] = None  # categoricals, most frequent first


class GroupStat(BaseModel):
    mean: float
    median: float
    n: int


class MetricsReport(BaseModel):
    mae: float
    rmse: float
    r_squared: Optional[float] = Field(default=None, description="None when y is constant")
    pearson_stat: float
    n: int


class PearsonReport(BaseModel):
    per_observation: float
    total: float
    per_df: Optional[float] = None


class FiveNumberSummary(BaseModel):
    min: float
    q1: float
    median: float
    q3: float
    max: float


class PartitionDiagnostics(BaseModel):
    """Held-out or in-sample diagnostics of one model on one partition"""
    partition: str
    metrics: MetricsReport
    pearson: PearsonReport
    deviance: float
    deviance_residuals: FiveNumberSummary


class DiagnosticsReport(BaseModel):
    model_terms: List[str]
    family: str
    partitions: List[PartitionDiagnostics]


@dataclass(frozen=True)
class ResidualData:
    """Plot data behind residual-vs-fitted and normal q-q charts"""
    fitted: np.ndarray = field(repr=False)
    deviance_residuals: np.ndarray = field(repr=False)
    qq_theoretical: np.ndarray = field(repr=False)
    qq_sample: np.ndarray = field(repr=False)

    def __post_init__(self):
        lengths = {len(self.fitted), len(self.deviance_residuals), len(self.qq_theoretical), len(self.qq_sample)}
        if len(lengths) != 1:
            raise ValueError("residual vectors must share one length")

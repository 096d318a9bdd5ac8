from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.models.design import TermEncoding


class Family(str, Enum):
    """Error distribution and link of a GLM"""
    POISSON_LOG = "poisson-log"
    GAUSSIAN_IDENTITY = "gaussian-identity"

    @property
    def distribution(self) -> str:
        return self.value.split("-")[0]

    @property
    def link(self) -> str:
        return self.value.split("-")[1]


class Criterion(str, Enum):
    """Information criterion used to compare models"""
    AIC = "aic"
    BIC = "bic"


class FitOptions(BaseModel):
    """IRLS stopping rule"""
    max_iterations: int = Field(25, ge=1)
    tolerance: float = Field(1e-8, gt=0, description="relative deviance change")


@dataclass(frozen=True)
class GlmFit:
    """Fitted GLM; immutable and safe to share across threads"""
    family: Family
    column_names: Tuple[str, ...]
    beta: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)
    deviance: float
    null_deviance: float
    df_null: int
    df_residual: int
    log_likelihood: float
    aic: float
    bic: float
    n: int
    iterations: int
    converged: bool
    dispersion: float = 1.0
    deviance_history: Tuple[float, ...] = ()
    terms: Tuple[TermEncoding, ...] = ()

    def __post_init__(self):
        for name in ("beta", "covariance"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def p(self) -> int:
        return len(self.column_names)

    @property
    def n_parameters(self) -> int:
        """Parameters charged by AIC/BIC; the gaussian scale counts as one"""
        return self.p + (1 if self.family == Family.GAUSSIAN_IDENTITY else 0)

    @property
    def term_names(self) -> List[str]:
        return [t.name for t in self.terms]

    def coefficient(self, name: str) -> float:
        return float(self.beta[self.column_names.index(name)])


@dataclass(frozen=True)
class CoefficientRow:
    """Wald inference for one coefficient"""
    name: str
    estimate: float
    std_error: float
    z: float
    p_value: float


class ModelDocument(BaseModel):
    """JSON persistence form of a GlmFit"""
    model_config = ConfigDict(protected_namespaces=())

    family: Family
    link: str
    column_names: List[str]
    terms: List[TermEncoding]
    beta: List[float]
    covariance: List[List[float]]
    n: int
    deviance: float
    null_deviance: float
    df_residual: int
    log_likelihood: float
    aic: float
    bic: float
    iterations: int
    converged: bool
    dispersion: float = 1.0
    response: Optional[str] = None

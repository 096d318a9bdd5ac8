from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.models.table import ColumnKind

INTERCEPT = "(Intercept)"


class TermEncoding(BaseModel):
    """How one model term maps onto design-matrix columns"""
    name: str
    kind: ColumnKind
    levels: Optional[List[str]] = None  # factor levels, reference first
    reference: Optional[str] = None
    columns: List[str] = Field(default_factory=list)


@dataclass(frozen=True)
class DesignMatrix:
    """Dense design matrix with named columns; intercept first"""
    column_names: Tuple[str, ...]
    values: np.ndarray = field(repr=False)
    terms: Tuple[TermEncoding, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2 or values.shape[1] != len(self.column_names):
            raise ValueError(f"matrix shape {values.shape} does not match {len(self.column_names)} column names")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column_index(self, name: str) -> int:
        return self.column_names.index(name)


class SplitSpec(BaseModel):
    """Seeded train/test partition request"""
    train_fraction: float = Field(0.7, gt=0, lt=1)
    seed: int = 20080101
    train_size: Optional[int] = Field(default=None, description="explicit override of round(n * fraction)")

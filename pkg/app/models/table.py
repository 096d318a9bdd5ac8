from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, Field, model_validator

from app.errors import ColumnLookupError


class ColumnKind(str, Enum):
    """Storage kind of a study column"""
    COUNT = "count-integer"
    CATEGORICAL = "categorical"


class ColumnSchema(BaseModel):
    """One column of the encounter schema"""
    name: str = Field(..., min_length=1)
    kind: ColumnKind
    allowed_levels: Optional[List[str]] = Field(default=None, description="categorical only")
    allow_missing: bool = False

    @model_validator(mode="after")
    def _levels_only_for_categoricals(self) -> "ColumnSchema":
        if self.allowed_levels is not None and self.kind != ColumnKind.CATEGORICAL:
            raise ValueError(f"column '{self.name}': allowed_levels only apply to categorical columns")
        return self


def check_unique_names(schema: List[ColumnSchema]) -> None:
    seen = set()
    for column in schema:
        if column.name in seen:
            raise ValueError(f"Duplicate column in schema: '{column.name}'")
        seen.add(column.name)


@dataclass(frozen=True)
class RawTable:
    """
    Immutable columnar table.

    Count columns are stored as pandas nullable ``Int64``, categoricals as ``string``;
    the missing marker is ``pd.NA`` in both.
    """
    schema: Tuple[ColumnSchema, ...]
    frame: pd.DataFrame = field(repr=False)

    def __post_init__(self):
        check_unique_names(list(self.schema))
        names = [c.name for c in self.schema]
        if list(self.frame.columns) != names:
            raise ValueError(f"Frame columns {list(self.frame.columns)} do not match schema {names}")
        frame = self.frame.reset_index(drop=True).copy()
        for column in self.schema:
            dtype = "Int64" if column.kind == ColumnKind.COUNT else "string"
            frame[column.name] = frame[column.name].astype(dtype)
        object.__setattr__(self, "frame", frame)

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def column_names(self) -> List[str]:
        return [c.name for c in self.schema]

    def schema_for(self, name: str) -> ColumnSchema:
        for column in self.schema:
            if column.name == name:
                return column
        raise ColumnLookupError(name)

    def column(self, name: str) -> pd.Series:
        """Copy of one column's values"""
        self.schema_for(name)
        return self.frame[name].copy()

    def categorical_columns(self) -> List[str]:
        return [c.name for c in self.schema if c.kind == ColumnKind.CATEGORICAL]

    def count_columns(self) -> List[str]:
        return [c.name for c in self.schema if c.kind == ColumnKind.COUNT]

    def take(self, indices) -> "RawTable":
        """Rows at the given positions, in the given order"""
        return RawTable(self.schema, self.frame.iloc[list(indices)])

    def replace_column(self, schema: ColumnSchema, values: pd.Series) -> "RawTable":
        """Table with one column's schema and values swapped"""
        self.schema_for(schema.name)
        new_schema = tuple(schema if c.name == schema.name else c for c in self.schema)
        frame = self.frame.copy()
        frame[schema.name] = values.reset_index(drop=True)
        return RawTable(new_schema, frame)

    def missing_counts(self) -> Dict[str, int]:
        return {name: int(self.frame[name].isna().sum()) for name in self.column_names}

    def equals(self, other: "RawTable") -> bool:
        return list(self.schema) == list(other.schema) and self.frame.equals(other.frame)


class FactorSpec(BaseModel):
    """Ordered levels of one categorical variable, reference level first"""
    variable: str
    levels: List[str] = Field(..., min_length=1)
    reference: str

    @model_validator(mode="after")
    def _reference_first(self) -> "FactorSpec":
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"factor '{self.variable}' has duplicate levels")
        if self.reference != self.levels[0]:
            raise ValueError(f"factor '{self.variable}': reference '{self.reference}' must be the first level")
        return self

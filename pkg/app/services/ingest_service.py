"""
Encounter CSV ingestion: schema, typed parsing, writing and column summaries.
"""

import json
import logging
import math
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd
from pydantic import TypeAdapter, ValidationError

from app.errors import InputError, ParseError, SchemaError
from app.models.reports import ColumnSummary
from app.models.table import ColumnKind, ColumnSchema, RawTable, check_unique_names
from app.services import artifacts

logger = logging.getLogger(__name__)

DEFAULT_MISSING_TOKENS = ("?", "")

AGE_LEVELS = [f"[{lo}-{lo + 10})" for lo in range(0, 100, 10)]
MEDICATION_LEVELS = ["No", "Down", "Steady", "Up"]
READMITTED_LEVELS = ["NO", "<30", ">30"]
GENDER_LEVELS = ["Female", "Male"]
RACE_LEVELS = ["Missing", "AfricanAmerican", "Other", "Caucasian"]
ADMIT_TYPE_LEVELS = ["1", "2", "3", "4"]

# At most 18 digits, so every accepted count fits in int64
_COUNT_TOKEN = r"\d{1,18}"


def _count(name: str, allow_missing: bool = False) -> ColumnSchema:
    return ColumnSchema(name=name, kind=ColumnKind.COUNT, allow_missing=allow_missing)


def _factor(name: str, levels=None, allow_missing: bool = False) -> ColumnSchema:
    return ColumnSchema(name=name, kind=ColumnKind.CATEGORICAL, allowed_levels=levels, allow_missing=allow_missing)


# Raw 13-column study extract
STUDY_SCHEMA: List[ColumnSchema] = [
    _count("days"),
    _factor("gender", allow_missing=True),
    _factor("age", AGE_LEVELS),
    _factor("race", allow_missing=True),
    _factor("weight", allow_missing=True),
    _count("admit_type_id", allow_missing=True),
    _factor("metformin", MEDICATION_LEVELS),
    _factor("insulin", MEDICATION_LEVELS),
    _factor("readmitted", READMITTED_LEVELS),
    _count("num_procs"),
    _count("num_meds"),
    _count("num_ip"),
    _count("num_diags"),
]

# Output of the cleaning recipe (weight dropped, race and admit_type_id recoded)
CLEANED_SCHEMA: List[ColumnSchema] = [
    _count("days"),
    _factor("gender", GENDER_LEVELS),
    _factor("age", AGE_LEVELS),
    _factor("race", RACE_LEVELS),
    _factor("admit_type_id", ADMIT_TYPE_LEVELS),
    _factor("metformin", MEDICATION_LEVELS),
    _factor("insulin", MEDICATION_LEVELS),
    _factor("readmitted", READMITTED_LEVELS),
    _count("num_procs"),
    _count("num_meds"),
    _count("num_ip"),
    _count("num_diags"),
]


def read_header(path: Path) -> List[str]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Input file not found: {path}")
    try:
        return list(pd.read_csv(path, nrows=0, dtype=str, encoding="utf-8").columns)
    except pd.errors.EmptyDataError:
        raise InputError(f"{path} is empty; a header row is required")


def resolve_schema(path: Path) -> List[ColumnSchema]:
    """Raw study schema, or the cleaned one when the file has already been through the recipe"""
    header = read_header(path)
    if "weight" not in header and set(c.name for c in CLEANED_SCHEMA) <= set(header):
        logger.info(f"{path} has no weight column; reading it as cleaned data")
        return list(CLEANED_SCHEMA)
    return list(STUDY_SCHEMA)


def load_schema_file(path: Path) -> List[ColumnSchema]:
    """Parse a JSON array of {name, kind, allowed_levels, allow_missing}"""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        schema = TypeAdapter(List[ColumnSchema]).validate_python(raw)
        check_unique_names(schema)
    except FileNotFoundError:
        raise InputError(f"Schema file not found: {path}")
    except (json.JSONDecodeError, ValidationError, ValueError) as e:
        raise InputError(f"Invalid schema file {path}: {e}")
    return schema


def _first_bad_row(mask: pd.Series) -> int:
    # 1-based data row number (header excluded)
    return int(np.flatnonzero(mask.to_numpy())[0]) + 1


def _parse_column(tokens: pd.Series, column: ColumnSchema, missing_tokens: Sequence[str]) -> pd.Series:
    is_missing = tokens.isin(list(missing_tokens))

    if column.kind == ColumnKind.COUNT:
        valid = tokens.str.fullmatch(_COUNT_TOKEN) & ~is_missing
    elif column.allowed_levels is not None:
        valid = tokens.isin(column.allowed_levels) & ~is_missing
    else:
        valid = ~is_missing

    # Unparseable cells in allow_missing columns become missing markers
    bad = ~valid
    if bad.any() and not column.allow_missing:
        row = _first_bad_row(bad)
        token = tokens.iloc[row - 1]
        raise ParseError(f"Cannot parse {token!r} as {column.kind.value}", row=row, column=column.name)

    if column.kind == ColumnKind.COUNT:
        values = pd.Series(pd.NA, index=tokens.index, dtype="Int64")
        values[valid] = tokens[valid].astype("int64")
        return values
    return tokens.astype("string").where(valid, pd.NA)


def load_csv(path: Path, schema: Sequence[ColumnSchema], missing_tokens: Sequence[str] = DEFAULT_MISSING_TOKENS) -> RawTable:
    """
    Parse an encounter CSV into a typed table.

    Args:
        path: RFC-4180 CSV with a header row
        schema: expected columns; extra columns in the file are ignored
        missing_tokens: cell values that denote a missing entry

    Returns:
        RawTable with columns in schema order
    """
    path = Path(path)
    header = read_header(path)

    header_set = set(header)
    for column in schema:
        if column.name not in header_set:
            raise SchemaError(f"Column '{column.name}' is missing from the header of {path}", column=column.name)

    extras = [name for name in header if name not in {c.name for c in schema}]
    if extras:
        logger.warning(f"Ignoring {len(extras)} extra column(s) in {path}: {', '.join(extras)}")

    raw = pd.read_csv(
        path,
        dtype=str,
        keep_default_na=False,
        na_filter=False,
        encoding="utf-8",
    )

    frame = pd.DataFrame({c.name: _parse_column(raw[c.name], c, missing_tokens) for c in schema}, index=raw.index)
    table = RawTable(tuple(schema), frame)
    logger.info(f"Loaded {table.n_rows} rows x {len(schema)} columns from {path}")
    return table


def to_csv_text(table: RawTable, missing_token: str = "?") -> str:
    return table.frame.to_csv(index=False, na_rep=missing_token, lineterminator="\n")


def write_csv(table: RawTable, path: Path, missing_token: str = "?") -> Path:
    """Write a table so that load_csv with the same schema reproduces it"""
    return artifacts.atomic_write_text(path, to_csv_text(table, missing_token))


def column_summary(table: RawTable, name: str) -> ColumnSummary:
    """
    Summary over non-missing entries: quartiles by linear interpolation between
    order statistics for count columns, level frequencies for categoricals.
    """
    column = table.schema_for(name)
    values = table.frame[name]
    present = values.dropna()

    summary = ColumnSummary(name=name, kind=column.kind, n=len(present), n_missing=int(values.isna().sum()))

    if column.kind == ColumnKind.CATEGORICAL:
        counts = present.value_counts()
        ordered = sorted(((str(level), int(n)) for level, n in counts.items()), key=lambda kv: (-kv[1], kv[0]))
        summary.levels = dict(ordered)
        return summary

    if len(present) == 0:
        return summary

    data = present.to_numpy(dtype=float)
    q1, median, q3 = np.quantile(data, [0.25, 0.5, 0.75])
    summary.min = float(data.min())
    summary.q1 = float(q1)
    summary.median = float(median)
    summary.mean = math.fsum(data) / len(data)
    summary.q3 = float(q3)
    summary.max = float(data.max())
    return summary

"""
Cleaning recipe for the diabetic-encounter extract.

Fixed order: drop invalid gender rows -> drop weight -> recode race ->
factorize admit_type_id -> build factor specs (most frequent level first).
"""

import logging
from typing import Dict, List, Tuple

import pandas as pd

from app.errors import DataValidationError
from app.models.reports import CleaningReport
from app.models.table import ColumnKind, ColumnSchema, FactorSpec, RawTable
from app.services.ingest_service import ADMIT_TYPE_LEVELS, GENDER_LEVELS, RACE_LEVELS

logger = logging.getLogger(__name__)

RACE_RECODE = {
    "Caucasian": "Caucasian",
    "AfricanAmerican": "AfricanAmerican",
    "Asian": "Other",
    "Hispanic": "Other",
    "Other": "Other",
    "Missing": "Missing",  # already recoded
}


def drop_invalid_gender(table: RawTable) -> Tuple[RawTable, int]:
    """Remove rows whose gender is not Female or Male (missing included)"""
    gender = table.column("gender")
    keep = gender.isin(GENDER_LEVELS).fillna(False).astype(bool)
    removed = int((~keep).sum())
    if removed:
        logger.info(f"Removing {removed} row(s) with invalid gender")
    cleaned = table.take(keep[keep].index)
    gender_schema = table.schema_for("gender").model_copy(update={"allowed_levels": list(GENDER_LEVELS), "allow_missing": False})
    return cleaned.replace_column(gender_schema, cleaned.column("gender")), removed


def drop_column(table: RawTable, name: str) -> RawTable:
    table.schema_for(name)
    schema = tuple(c for c in table.schema if c.name != name)
    return RawTable(schema, table.frame.drop(columns=[name]))


def recode_race(table: RawTable) -> RawTable:
    """Missing -> "Missing"; Asian, Hispanic and Other -> "Other"; the rest unchanged"""
    race = table.column("race")
    observed = set(race.dropna().unique())
    unexpected = sorted(observed - set(RACE_RECODE))
    if unexpected:
        raise DataValidationError(f"Unexpected race level: '{unexpected[0]}'")

    recoded = race.map(RACE_RECODE, na_action="ignore").astype("string").fillna("Missing")
    schema = ColumnSchema(name="race", kind=ColumnKind.CATEGORICAL, allowed_levels=list(RACE_LEVELS))
    return table.replace_column(schema, recoded)


def factorize_admit_type(table: RawTable) -> RawTable:
    """Integer admission codes 1-4 become categorical levels "1".."4"; code 4 (unavailable) stays a level"""
    column = table.schema_for("admit_type_id")
    values = table.column("admit_type_id")

    if values.isna().any():
        raise DataValidationError("admit_type_id has missing values; expected codes 1-4")

    codes = values.astype(str) if column.kind == ColumnKind.COUNT else values
    out_of_range = sorted(set(codes.unique()) - set(ADMIT_TYPE_LEVELS))
    if out_of_range:
        raise DataValidationError(f"admit_type_id code {out_of_range[0]} is outside 1-4")

    schema = ColumnSchema(name="admit_type_id", kind=ColumnKind.CATEGORICAL, allowed_levels=list(ADMIT_TYPE_LEVELS))
    return table.replace_column(schema, codes.astype("string"))


def level_order(values: pd.Series) -> List[str]:
    """Observed levels by descending frequency, ties broken lexicographically"""
    counts = values.dropna().value_counts()
    return [level for level, _ in sorted(((str(k), int(v)) for k, v in counts.items()), key=lambda kv: (-kv[1], kv[0]))]


def build_factor_specs(table: RawTable) -> List[FactorSpec]:
    specs = []
    for name in table.categorical_columns():
        levels = level_order(table.column(name))
        if not levels:
            raise DataValidationError(f"Categorical column '{name}' has no observed levels")
        specs.append(FactorSpec(variable=name, levels=levels, reference=levels[0]))
    return specs


def _check_no_missing(table: RawTable) -> None:
    for name, n_missing in table.missing_counts().items():
        if n_missing:
            raise DataValidationError(f"Column '{name}' has {n_missing} unexpected missing value(s)")


def run_recipe(table: RawTable) -> Tuple[RawTable, List[FactorSpec], CleaningReport]:
    """
    Apply the full cleaning recipe.

    Returns:
        (cleaned table, factor specs, cleaning report)
    """
    rows_in = table.n_rows
    missing_before = table.missing_counts()

    # Columns other than these must arrive complete
    for name, n_missing in missing_before.items():
        if n_missing and name not in {"gender", "weight", "race", "admit_type_id"}:
            raise DataValidationError(f"Column '{name}' has {n_missing} unexpected missing value(s)")

    table, removed = drop_invalid_gender(table)

    dropped = []
    if "weight" in table.column_names:
        table = drop_column(table, "weight")
        dropped.append("weight")

    table = recode_race(table)
    table = factorize_admit_type(table)
    _check_no_missing(table)
    specs = build_factor_specs(table)

    race_counts = table.column("race").value_counts()
    report = CleaningReport(
        rows_in=rows_in,
        rows_removed_gender=removed,
        columns_dropped=dropped,
        race_recode_counts={level: int(race_counts.get(level, 0)) for level in RACE_LEVELS},
        rows_out=table.n_rows,
        rows_missing_by_column={k: v for k, v in missing_before.items() if v},
    )
    logger.info(f"✅ Cleaning complete: {report.rows_in} rows in, {report.rows_out} rows out")
    return table, specs, report

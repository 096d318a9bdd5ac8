"""
Shared fixtures: synthetic encounter extracts shaped like the study file.
"""

import os
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd
import pytest

from app.models.table import ColumnKind, ColumnSchema, RawTable
from app.services import ingest_service, preprocess_service
from app.services.ingest_service import AGE_LEVELS, MEDICATION_LEVELS, READMITTED_LEVELS

STUDY_DATA_ENV = "LOS_STUDY_DATA"


def make_table(columns: Dict[str, Tuple[ColumnKind, Sequence]]) -> RawTable:
    """RawTable from {name: (kind, values)}; None becomes a missing marker"""
    schema = tuple(ColumnSchema(name=name, kind=kind, allow_missing=True) for name, (kind, _) in columns.items())
    frame = pd.DataFrame({name: pd.Series(list(values), dtype="object") for name, (_, values) in columns.items()})
    frame = frame.where(frame.notna(), pd.NA)
    return RawTable(schema, frame)


def synthetic_extract(n: int, seed: int = 7, invalid_gender: int = 2) -> pd.DataFrame:
    """
    Raw 13-column extract of string tokens. Length of stay follows a Poisson model driven
    mostly by num_meds and admit_type_id, so selection has a clear first pick.
    """
    rng = np.random.default_rng(seed)
    num_meds = rng.integers(1, 40, size=n)
    admit = rng.choice([1, 2, 3, 4], size=n, p=[0.5, 0.2, 0.2, 0.1])
    num_diags = rng.integers(1, 10, size=n)
    eta = 0.4 + 0.03 * num_meds + np.where(admit == 2, 0.15, 0.0) + 0.02 * num_diags
    days = np.clip(rng.poisson(np.exp(eta)), 1, 14)

    gender = rng.choice(["Female", "Male"], size=n, p=[0.55, 0.45]).astype(object)
    gender[:invalid_gender] = "Unknown/Invalid"
    race = rng.choice(
        ["Caucasian", "AfricanAmerican", "Asian", "Hispanic", "Other", "?"],
        size=n,
        p=[0.7, 0.15, 0.03, 0.04, 0.04, 0.04],
    )
    weight = np.where(rng.random(n) < 0.9, "?", "[75-100)")

    return pd.DataFrame(
        {
            "days": days.astype(str),
            "gender": gender,
            "age": rng.choice(AGE_LEVELS, size=n),
            "race": race,
            "weight": weight,
            "admit_type_id": admit.astype(str),
            "metformin": rng.choice(MEDICATION_LEVELS, size=n, p=[0.8, 0.05, 0.1, 0.05]),
            "insulin": rng.choice(MEDICATION_LEVELS, size=n, p=[0.45, 0.15, 0.25, 0.15]),
            "readmitted": rng.choice(READMITTED_LEVELS, size=n, p=[0.55, 0.1, 0.35]),
            "num_procs": rng.integers(0, 6, size=n).astype(str),
            "num_meds": num_meds.astype(str),
            "num_ip": rng.integers(0, 4, size=n).astype(str),
            "num_diags": num_diags.astype(str),
        }
    )


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


@pytest.fixture
def raw_csv(tmp_path) -> Path:
    return write_frame(synthetic_extract(600), tmp_path / "extract.csv")


@pytest.fixture
def raw_table(raw_csv) -> RawTable:
    return ingest_service.load_csv(raw_csv, ingest_service.STUDY_SCHEMA)


@pytest.fixture
def cleaned(raw_table):
    """(table, specs, report) after the cleaning recipe"""
    return preprocess_service.run_recipe(raw_table)


@pytest.fixture
def study_csv() -> Path:
    path = os.environ.get(STUDY_DATA_ENV)
    if not path or not Path(path).is_file():
        pytest.skip(f"Set {STUDY_DATA_ENV} to the 10,000-row study extract to run this test")
    return Path(path)

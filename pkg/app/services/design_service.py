"""
Design-matrix encoding (treatment dummies against the reference level) and the
seeded train/test split.
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.errors import DataValidationError, EncodingError, SchemaError
from app.models.design import INTERCEPT, DesignMatrix, SplitSpec, TermEncoding
from app.models.table import ColumnKind, FactorSpec, RawTable
from app.services import artifacts

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """
    64-bit SplitMix generator. Fully specified so that any implementation seeded
    with the same value produces the same partition.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def shuffle(self, n: int) -> List[int]:
        """Fisher-Yates over range(n): for i = n-1..1 swap i with next_u64() mod (i+1)"""
        indices = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            indices[i], indices[j] = indices[j], indices[i]
        return indices


def resolve_train_size(n: int, spec: SplitSpec) -> int:
    """Explicit train_size if given, else n * fraction rounded half-up"""
    size = spec.train_size if spec.train_size is not None else math.floor(n * spec.train_fraction + 0.5)
    if not 0 < size < n:
        raise DataValidationError(f"train_size {size} must lie strictly between 0 and n = {n}")
    return size


def split_indices(n: int, spec: SplitSpec) -> Tuple[List[int], List[int]]:
    size = resolve_train_size(n, spec)
    shuffled = SplitMix64(spec.seed).shuffle(n)
    return sorted(shuffled[:size]), sorted(shuffled[size:])


def split(table: RawTable, spec: SplitSpec) -> Tuple[RawTable, RawTable]:
    """
    Partition rows into train and test sets.

    Both partitions keep the rows' original relative order.
    """
    train_idx, test_idx = split_indices(table.n_rows, spec)
    logger.info(f"Split {table.n_rows} rows into {len(train_idx)} train / {len(test_idx)} test (seed {spec.seed})")
    return table.take(train_idx), table.take(test_idx)


def _ordered_terms(table: RawTable, terms: Sequence[str]) -> List[str]:
    for term in terms:
        table.schema_for(term)
    if len(set(terms)) != len(terms):
        raise DataValidationError(f"Duplicate terms in {list(terms)}")
    position = {name: i for i, name in enumerate(table.column_names)}
    return sorted(terms, key=lambda t: position[t])


def encode_predictors(table: RawTable, specs: Sequence[FactorSpec], terms: Sequence[str]) -> DesignMatrix:
    """Design matrix without a response; used for new data at prediction time"""
    spec_by_name: Dict[str, FactorSpec] = {s.variable: s for s in specs}
    n = table.n_rows
    names = [INTERCEPT]
    blocks = [np.ones((n, 1))]
    encodings = []

    for term in _ordered_terms(table, terms):
        values = table.frame[term]
        if values.isna().any():
            raise DataValidationError(f"Term '{term}' has missing values")

        if table.schema_for(term).kind == ColumnKind.COUNT:
            names.append(term)
            blocks.append(values.to_numpy(dtype=float).reshape(-1, 1))
            encodings.append(TermEncoding(name=term, kind=ColumnKind.COUNT, columns=[term]))
            continue

        spec = spec_by_name.get(term)
        if spec is None:
            raise DataValidationError(f"No factor spec for categorical term '{term}'")
        unknown = sorted(set(values.unique()) - set(spec.levels))
        if unknown:
            raise EncodingError(term, str(unknown[0]))

        dummy_levels = spec.levels[1:]
        column_names = [f"{term}{level}" for level in dummy_levels]
        raw = values.to_numpy(dtype=object)
        block = np.column_stack([raw == level for level in dummy_levels]).astype(float) if dummy_levels else np.empty((n, 0))
        names.extend(column_names)
        blocks.append(block)
        encodings.append(
            TermEncoding(
                name=term,
                kind=ColumnKind.CATEGORICAL,
                levels=list(spec.levels),
                reference=spec.reference,
                columns=column_names,
            )
        )

    return DesignMatrix(tuple(names), np.hstack(blocks), tuple(encodings))


def encode(
    table: RawTable,
    specs: Sequence[FactorSpec],
    terms: Sequence[str],
    response: str,
) -> Tuple[DesignMatrix, np.ndarray]:
    """
    Build the design matrix and response vector.

    Args:
        table: cleaned table
        specs: factor specs; every categorical term needs one
        terms: predictor names, any order (columns follow the table's column order)
        response: count column used as y

    Returns:
        (DesignMatrix, response vector as float array)
    """
    if table.schema_for(response).kind != ColumnKind.COUNT:
        raise DataValidationError(f"Response '{response}' must be a count column")
    if response in terms:
        raise DataValidationError(f"Response '{response}' cannot also be a term")

    matrix = encode_predictors(table, specs, terms)
    y = table.frame[response]
    if y.isna().any():
        raise DataValidationError(f"Response '{response}' has missing values")
    return matrix, y.to_numpy(dtype=float)


def dump_matrix(matrix: DesignMatrix, path: Path) -> Path:
    """Diagnostic CSV with header = column names"""
    return artifacts.write_numeric_csv(path, matrix.column_names, matrix.values.tolist())


def specs_from_encodings(encodings: Sequence[TermEncoding]) -> List[FactorSpec]:
    """Factor specs recorded in a model's term metadata, for encoding new data the same way"""
    return [
        FactorSpec(variable=t.name, levels=list(t.levels), reference=t.reference)
        for t in encodings
        if t.kind == ColumnKind.CATEGORICAL
    ]


def align_columns(matrix: DesignMatrix, column_names: Sequence[str]) -> DesignMatrix:
    """Reorder columns to ``column_names``; SchemaError if the two sets differ"""
    if set(matrix.column_names) != set(column_names) or len(matrix.column_names) != len(column_names):
        raise SchemaError(f"Design columns {list(matrix.column_names)} do not match model columns {list(column_names)}")
    order = [matrix.column_index(name) for name in column_names]
    return DesignMatrix(tuple(column_names), matrix.values[:, order], matrix.terms)

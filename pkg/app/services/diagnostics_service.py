"""
Exploratory statistics, held-out fit metrics, goodness of fit and residual plot data.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special

from app.errors import DataValidationError, DomainError
from app.models.glm import Family
from app.models.reports import FiveNumberSummary, GroupStat, MetricsReport, PearsonReport, ResidualData
from app.models.table import ColumnKind, RawTable
from app.services.family import family_ops
from app.services.preprocess_service import level_order

logger = logging.getLogger(__name__)


def _pair(y, mu):
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if y.shape != mu.shape:
        raise DataValidationError(f"y has {y.size} entries, mu has {mu.size}")
    return y, mu


def _pearson_terms(y: np.ndarray, mu: np.ndarray, family: Family) -> np.ndarray:
    ops = family_ops(family)
    if Family(family) == Family.POISSON_LOG and np.any(~(mu > 0)):
        raise DomainError("Pearson statistic needs strictly positive means")
    return (y - mu) ** 2 / ops.variance(mu)


def pearson_statistic(y, mu, family: Family = Family.POISSON_LOG) -> float:
    """Per-observation mean of (y - mu)^2 / V(mu)"""
    y, mu = _pair(y, mu)
    if y.size == 0:
        raise DataValidationError("Pearson statistic needs at least one observation")
    return math.fsum(_pearson_terms(y, mu, family)) / y.size


def pearson_variants(y, mu, family: Family = Family.POISSON_LOG, df_residual: Optional[int] = None) -> PearsonReport:
    """
    Per-observation mean, raw sum and sum / df_residual.

    per_df is only reported when df_residual is known and positive (in-sample partitions).
    """
    y, mu = _pair(y, mu)
    total = math.fsum(_pearson_terms(y, mu, family))
    return PearsonReport(
        per_observation=total / y.size,
        total=total,
        per_df=total / df_residual if df_residual else None,
    )


def fit_metrics(y, mu, family: Family = Family.POISSON_LOG) -> MetricsReport:
    y, mu = _pair(y, mu)
    n = y.size
    if n < 2:
        raise DataValidationError(f"Fit metrics need at least 2 observations, got {n}")

    residuals = y - mu
    sse = math.fsum(residuals ** 2)
    sst = math.fsum((y - y.mean()) ** 2)
    return MetricsReport(
        mae=math.fsum(np.abs(residuals)) / n,
        rmse=math.sqrt(sse / n),
        r_squared=1.0 - sse / sst if sst > 0 else None,
        pearson_stat=pearson_statistic(y, mu, family),
        n=n,
    )


def deviance_residuals(y, mu, family: Family = Family.POISSON_LOG) -> np.ndarray:
    """sign(y - mu) * sqrt(d_i)"""
    y, mu = _pair(y, mu)
    contributions = family_ops(family).deviance_contributions(y, mu)
    # Rounding can leave tiny negative contributions when y == mu
    return np.sign(y - mu) * np.sqrt(np.maximum(contributions, 0.0))


def qq_data(residuals) -> tuple:
    """(theoretical, sample): normal quantiles at (i - 0.5) / n against sorted residuals"""
    sample = np.sort(np.asarray(residuals, dtype=float))
    n = sample.size
    if n < 2:
        raise DataValidationError(f"q-q data needs at least 2 residuals, got {n}")
    theoretical = special.ndtri((np.arange(1, n + 1) - 0.5) / n)
    return theoretical, sample


def residual_data(y, mu, family: Family = Family.POISSON_LOG) -> ResidualData:
    y, mu = _pair(y, mu)
    residuals = deviance_residuals(y, mu, family)
    theoretical, sample = qq_data(residuals)
    return ResidualData(fitted=mu, deviance_residuals=residuals, qq_theoretical=theoretical, qq_sample=sample)


def five_number_summary(values) -> FiveNumberSummary:
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise DataValidationError("Five-number summary of an empty vector")
    q1, median, q3 = np.quantile(data, [0.25, 0.5, 0.75])
    return FiveNumberSummary(min=float(data.min()), q1=float(q1), median=float(median), q3=float(q3), max=float(data.max()))


def _numeric(table: RawTable, name: str) -> pd.Series:
    if table.schema_for(name).kind != ColumnKind.COUNT:
        raise DataValidationError(f"Column '{name}' is not numeric")
    return table.frame[name]


def _group_stat(data: np.ndarray) -> GroupStat:
    return GroupStat(mean=math.fsum(data) / data.size, median=float(np.median(data)), n=int(data.size))


def overall_stat(table: RawTable, target: str) -> Optional[GroupStat]:
    """Mean, median and count of ``target`` over the whole table; None when empty"""
    data = _numeric(table, target).dropna().to_numpy(dtype=float)
    return _group_stat(data) if data.size else None


def group_means(
    table: RawTable,
    by: str,
    target: str,
    levels: Optional[Sequence[str]] = None,
) -> Dict[str, GroupStat]:
    """
    Mean, median and count of ``target`` within each level of ``by``.

    Args:
        table: source table
        by: categorical column
        target: numeric column
        levels: output order; defaults to descending frequency

    Returns:
        level -> GroupStat, in output order; levels absent from the data are skipped
    """
    if table.schema_for(by).kind != ColumnKind.CATEGORICAL:
        raise DataValidationError(f"Column '{by}' is not categorical")
    values = _numeric(table, target)
    keys = table.frame[by]

    order = list(levels) if levels is not None else level_order(keys)
    result: Dict[str, GroupStat] = {}
    for level in order:
        mask = (keys == level).fillna(False).to_numpy(dtype=bool)
        data = values[mask].dropna().to_numpy(dtype=float)
        if data.size == 0:
            continue
        result[level] = _group_stat(data)
    return result


def correlation(x, y) -> float:
    """Pearson product-moment correlation"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DataValidationError(f"Correlation of vectors with lengths {x.size} and {y.size}")
    if x.size < 2:
        raise DataValidationError("Correlation needs at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0 or syy == 0:
        raise DataValidationError("Correlation is undefined for a constant vector")
    return math.fsum(dx * dy) / math.sqrt(sxx * syy)


def correlation_matrix(table: RawTable, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Pairwise correlations of count columns over rows complete in each pair"""
    names = list(columns) if columns is not None else table.count_columns()
    matrix = pd.DataFrame(np.eye(len(names)), index=names, columns=names)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            pair = table.frame[[a, b]].dropna()
            try:
                r = correlation(pair[a].to_numpy(dtype=float), pair[b].to_numpy(dtype=float))
            except DataValidationError:
                logger.warning(f"Correlation of '{a}' and '{b}' is undefined")
                r = float("nan")
            matrix.loc[a, b] = r
            matrix.loc[b, a] = r
    return matrix


def response_distribution(table: RawTable, response: str) -> List[tuple]:
    """(value, count) pairs in ascending value order"""
    counts = _numeric(table, response).dropna().value_counts().sort_index()
    return [(int(value), int(n)) for value, n in counts.items()]

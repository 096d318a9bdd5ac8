"""
Evaluation commands: diagnose (in-sample and held-out diagnostics of a saved model) and
predict (means for new encounters, optionally decomposed into per-term factors).
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from app.commands.data import Partitions, prepare_partitions
from app.config import RunConfig
from app.errors import DomainError, InputError
from app.models.design import INTERCEPT
from app.models.glm import GlmFit
from app.models.reports import DiagnosticsReport, PartitionDiagnostics
from app.models.table import ColumnSchema, RawTable
from app.services import artifacts, diagnostics_service, glm_service, ingest_service
from app.services.design_service import align_columns, encode, encode_predictors, specs_from_encodings

logger = logging.getLogger(__name__)

# Relative tolerance of the explain identity mu = exp(b0) * prod_j factor_j
EXPLAIN_TOLERANCE = 1e-12


def load_fit(config: RunConfig) -> Tuple[GlmFit, Optional[str]]:
    if config.model_path is None:
        raise InputError("No model file given (use --model)")
    doc = glm_service.load_model(config.model_path)
    return glm_service.from_document(doc), doc.response


def _partition_data(fit: GlmFit, table: RawTable, response: str) -> Tuple[np.ndarray, np.ndarray]:
    """(y, mu) of a fitted model on one partition"""
    X, y = encode(table, specs_from_encodings(fit.terms), fit.term_names, response)
    return y, glm_service.predict(fit, align_columns(X, fit.column_names))


def partition_diagnostics(
    fit: GlmFit,
    name: str,
    y: np.ndarray,
    mu: np.ndarray,
    df_residual: Optional[int] = None,
) -> PartitionDiagnostics:
    residuals = diagnostics_service.deviance_residuals(y, mu, fit.family)
    return PartitionDiagnostics(
        partition=name,
        metrics=diagnostics_service.fit_metrics(y, mu, fit.family),
        pearson=diagnostics_service.pearson_variants(y, mu, fit.family, df_residual),
        deviance=math.fsum(residuals ** 2),
        deviance_residuals=diagnostics_service.five_number_summary(residuals),
    )


def write_diagnostics(out: Path, fit: GlmFit, parts: Partitions, response: str) -> List[Path]:
    """
    report.json over both partitions; residual-vs-fitted and q-q data from the train
    partition; held-out predictions in preds.csv.
    """
    y_train, mu_train = _partition_data(fit, parts.train, response)
    y_test, mu_test = _partition_data(fit, parts.test, response)

    report = DiagnosticsReport(
        model_terms=fit.term_names,
        family=fit.family.value,
        partitions=[
            partition_diagnostics(fit, "train", y_train, mu_train, fit.df_residual),
            partition_diagnostics(fit, "test", y_test, mu_test),
        ],
    )
    plots = diagnostics_service.residual_data(y_train, mu_train, fit.family)

    return [
        artifacts.write_json(out / "report.json", report),
        artifacts.write_numeric_csv(
            out / "residuals_vs_fitted.csv",
            ["fitted", "residual"],
            zip(plots.fitted.tolist(), plots.deviance_residuals.tolist()),
        ),
        artifacts.write_numeric_csv(
            out / "qq.csv",
            ["theoretical", "sample"],
            zip(plots.qq_theoretical.tolist(), plots.qq_sample.tolist()),
        ),
        artifacts.write_numeric_csv(
            out / "preds.csv",
            ["row_id", "y", "mu"],
            ((row + 1, float(y), float(mu)) for row, y, mu in zip(parts.test_rows, y_test.tolist(), mu_test.tolist())),
        ),
    ]


def cmd_diagnose(config: RunConfig) -> List[Path]:
    fit, response = load_fit(config)
    parts = prepare_partitions(config)
    written = write_diagnostics(config.output_dir, fit, parts, response or config.response)
    logger.info(f"✅ diagnose: {len(written)} artifact(s) written to {config.output_dir}")
    return written


# ============================================
# predict
# ============================================

def explain_factors(fit: GlmFit, values: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Multiplicative decomposition of poisson-log means.

    Returns:
        (exp(b0), n x terms matrix of exp(sum of b_j x_j over each term's columns))
    """
    baseline = math.exp(fit.coefficient(INTERCEPT))
    factors = np.empty((values.shape[0], len(fit.terms)))
    for k, term in enumerate(fit.terms):
        idx = [fit.column_names.index(c) for c in term.columns]
        factors[:, k] = np.exp(values[:, idx] @ fit.beta[idx])
    return baseline, factors


def predict_rows(fit: GlmFit, table: RawTable, explain: bool = False) -> Tuple[List[str], List[list]]:
    """Header and rows of the predictions CSV"""
    X = align_columns(encode_predictors(table, specs_from_encodings(fit.terms), fit.term_names), fit.column_names)
    mu = glm_service.predict(fit, X)
    row_ids = range(1, table.n_rows + 1)

    if not explain:
        return ["row_id", "mu"], [[i, float(m)] for i, m in zip(row_ids, mu)]

    if fit.family.link != "log":
        raise DomainError("--explain needs a log-link model")
    baseline, factors = explain_factors(fit, X.values)
    reconstructed = baseline * np.prod(factors, axis=1)
    error = np.max(np.abs(reconstructed - mu) / mu) if mu.size else 0.0
    if error > EXPLAIN_TOLERANCE:
        raise DomainError(f"Factor decomposition is off by {error:.3g} relative to mu")

    header = ["row_id", "mu", "baseline"] + fit.term_names
    rows = [[i, float(m), baseline] + f.tolist() for i, m, f in zip(row_ids, mu, factors)]
    return header, rows


def newdata_schema(fit: GlmFit) -> List[ColumnSchema]:
    """
    Columns a prediction needs: the model's terms and nothing else.

    Factor levels are left open here so that a level the model has never seen reaches the
    encoder and fails there with the level named.
    """
    return [ColumnSchema(name=term.name, kind=term.kind) for term in fit.terms]


def cmd_predict(config: RunConfig) -> List[Path]:
    """
    Predicted means for a CSV of new encounters in cleaned form.

    Only the model's term columns are read; the response and any other column may be absent.
    A factor level the model has never seen fails with an EncodingError naming the level.
    """
    if config.newdata_path is None:
        raise InputError("No new data given (use --newdata)")
    fit, _ = load_fit(config)
    table = ingest_service.load_csv(config.newdata_path, newdata_schema(fit), config.missing_tokens)
    header, rows = predict_rows(fit, table, config.explain)
    path = artifacts.write_numeric_csv(config.output_dir / "predictions.csv", header, rows)
    logger.info(f"✅ predict: {len(rows)} prediction(s) written to {path}")
    return [path]

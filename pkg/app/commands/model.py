"""
Model commands: fit (full model on the train partition) and select (forward stepwise).
"""

import logging
from pathlib import Path
from typing import List, Sequence

import numpy as np

from app.commands.data import Partitions, prepare_partitions
from app.config import RunConfig
from app.models.design import DesignMatrix
from app.models.glm import FitOptions, GlmFit
from app.models.selection import SelectionTrace
from app.models.table import RawTable
from app.services import artifacts, diagnostics_service, formatting, glm_service, stepwise_service
from app.services.design_service import dump_matrix, encode

logger = logging.getLogger(__name__)


def fit_options(config: RunConfig) -> FitOptions:
    return FitOptions(max_iterations=config.max_iterations, tolerance=config.tolerance)


def model_terms(table: RawTable, config: RunConfig) -> List[str]:
    """Configured terms, or every column except the response"""
    if config.terms is not None:
        return list(config.terms)
    return [name for name in table.column_names if name != config.response]


def write_model(
    out: Path,
    fit: GlmFit,
    X: DesignMatrix,
    y: np.ndarray,
    response: str,
    explain: bool = False,
) -> List[Path]:
    """model.json and coefficients.txt for a fit on (X, y)"""
    mu = glm_service.predict(fit, X)
    residuals = diagnostics_service.five_number_summary(diagnostics_service.deviance_residuals(y, mu, fit.family))
    text = formatting.coefficient_summary(
        fit,
        stepwise_service.formula(response, fit.term_names),
        residuals=residuals,
        explain=explain,
    )
    return [
        glm_service.save_model(fit, out / "model.json", response),
        artifacts.atomic_write_text(out / "coefficients.txt", text),
    ]


def fit_terms(parts: Partitions, terms: Sequence[str], config: RunConfig):
    X, y = encode(parts.train, parts.specs, terms, config.response)
    return glm_service.fit(X, y, config.family, fit_options(config)), X, y


def cmd_fit(config: RunConfig) -> List[Path]:
    """Fit the configured terms on the train partition"""
    parts = prepare_partitions(config)
    fit, X, y = fit_terms(parts, model_terms(parts.table, config), config)
    written = write_model(config.output_dir, fit, X, y, config.response, config.explain)
    if config.dump_matrix:
        written.append(dump_matrix(X, config.output_dir / "design_matrix.csv"))
    logger.info(f"✅ fit: {fit.p} coefficient(s), deviance {fit.deviance:.2f}, BIC {glm_service.bic(fit):.2f}")
    return written


def run_selection(parts: Partitions, config: RunConfig) -> SelectionTrace:
    return stepwise_service.forward_select(
        parts.train,
        parts.specs,
        model_terms(parts.table, config),
        config.response,
        family=config.family,
        criterion=config.criterion,
        opts=fit_options(config),
        jobs=config.worker_count,
    )


def write_selection(out: Path, parts: Partitions, trace: SelectionTrace, config: RunConfig) -> List[Path]:
    X, y = encode(parts.train, parts.specs, list(trace.final_terms), config.response)
    return [
        artifacts.atomic_write_text(out / "trace.txt", stepwise_service.format_trace(trace)),
        artifacts.write_json(out / "trace.json", stepwise_service.trace_document(trace)),
    ] + write_model(out, trace.final_fit, X, y, config.response, config.explain)


def cmd_select(config: RunConfig) -> List[Path]:
    """Forward selection from the intercept-only model over the configured terms"""
    parts = prepare_partitions(config)
    trace = run_selection(parts, config)
    written = write_selection(config.output_dir, parts, trace, config)
    logger.info(f"✅ select: {stepwise_service.formula(config.response, trace.final_terms)}")
    return written

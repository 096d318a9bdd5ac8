"""
End-to-end study run: prep, eda, split, full fit, forward selection and diagnostics of
both models, written under one output directory.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List

from app.commands.data import partition_means, prepare_partitions, write_eda, write_prep, write_split
from app.commands.evaluate import write_diagnostics
from app.commands.model import fit_terms, model_terms, run_selection, write_model, write_selection
from app.config import RunConfig
from app.models.glm import GlmFit
from app.services import artifacts, glm_service, stepwise_service

logger = logging.getLogger(__name__)


def _model_summary(fit: GlmFit, response: str) -> Dict[str, Any]:
    return {
        "formula": stepwise_service.formula(response, fit.term_names),
        "coefficients": dict(zip(fit.column_names, fit.beta.tolist())),
        "multiplicative_factors": (
            {name: math.exp(b) for name, b in zip(fit.column_names, fit.beta.tolist())} if fit.family.link == "log" else None
        ),
        "deviance": fit.deviance,
        "aic": glm_service.aic(fit),
        "bic": glm_service.bic(fit),
        "converged": fit.converged,
    }


def cmd_report(config: RunConfig) -> List[Path]:
    """Run the whole analysis; every artifact lands under config.output_dir"""
    out = config.output_dir
    parts = prepare_partitions(config)
    written: List[Path] = []

    logger.info("🚀 Cleaning and exploring...")
    written += write_prep(out, parts.table, list(parts.specs), parts.report)
    written += write_eda(out / "eda", parts.table, config.response)
    written += write_split(out / "split", parts, config.response)

    logger.info("🚀 Fitting the full model...")
    full, X, y = fit_terms(parts, model_terms(parts.table, config), config)
    written += write_model(out / "full", full, X, y, config.response, config.explain)

    logger.info(f"🚀 Forward selection by {config.criterion.value.upper()}...")
    trace = run_selection(parts, config)
    selected = trace.final_fit
    written += write_selection(out / "selected", parts, trace, config)

    written += write_diagnostics(out / "diagnostics" / "full", full, parts, config.response)
    written += write_diagnostics(out / "diagnostics" / "selected", selected, parts, config.response)

    summary = {
        "seed": parts.split.seed,
        "rows": parts.table.n_rows,
        "train_size": len(parts.train_rows),
        "test_size": len(parts.test_rows),
        **partition_means(parts, config.response),
        "criterion": config.criterion.value,
        "selected_terms": list(trace.final_terms),
        # Expected response for a patient at every reference level with zero counts
        "baseline_prediction": glm_service.predict_baseline(selected),
        "full": _model_summary(full, config.response),
        "selected": _model_summary(selected, config.response),
    }
    written.append(artifacts.write_json(out / "summary.json", summary))

    logger.info(f"✅ report: {len(written)} artifact(s) written to {out}")
    return written

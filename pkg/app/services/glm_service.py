"""
GLM fitting by iteratively reweighted least squares, with likelihood, deviance,
information criteria, Wald inference and JSON persistence.
"""

import logging
import math
import warnings
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from scipy import linalg, special

from app.errors import (
    ConvergenceWarning,
    DataValidationError,
    DomainError,
    InferenceError,
    InputError,
    SchemaError,
    SingularDesignError,
)
from app.models.design import INTERCEPT, DesignMatrix
from app.models.glm import CoefficientRow, Family, FitOptions, GlmFit, ModelDocument
from app.services import artifacts
from app.services.family import FamilyOps, family_ops

logger = logging.getLogger(__name__)

# Relative threshold on |diag(R)| of the pivoted QR below which a column counts as aliased
RANK_TOLERANCE = 1e-7


def check_full_rank(X: DesignMatrix) -> None:
    if X.p == 0:
        return
    R, pivot = linalg.qr(X.values, mode="r", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        raise SingularDesignError(list(X.column_names))
    rank = int(np.sum(diag > RANK_TOLERANCE * diag[0]))
    if rank < X.p:
        aliased = [X.column_names[j] for j in pivot[rank:]]
        raise SingularDesignError(aliased)


def _weighted_qr(X: np.ndarray, eta: np.ndarray, mu: np.ndarray, ops: FamilyOps) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Q, R of sqrt(W) X and the weight square roots, W = (dmu/deta)^2 / V(mu)"""
    w = ops.mu_eta(eta) ** 2 / ops.variance(mu)
    sw = np.sqrt(w)
    Q, R = linalg.qr(X * sw[:, None], mode="economic")
    return Q, R, sw


def _irls_step(X: np.ndarray, y: np.ndarray, eta: np.ndarray, mu: np.ndarray, ops: FamilyOps) -> np.ndarray:
    # Working response z = eta + (y - mu) * deta/dmu
    z = eta + (y - mu) / ops.mu_eta(eta)
    Q, R, sw = _weighted_qr(X, eta, mu, ops)
    return linalg.solve_triangular(R, Q.T @ (sw * z))


def _null_deviance(y: np.ndarray, ops: FamilyOps) -> float:
    ybar = float(np.mean(y))
    if ops.kind == Family.POISSON_LOG and ybar == 0:
        return 0.0
    return float(np.sum(ops.deviance_contributions(y, np.full_like(y, ybar))))


def akaike(log_likelihood: float, n_parameters: int) -> float:
    """AIC = -2 ll + 2 k"""
    return -2.0 * log_likelihood + 2.0 * n_parameters


def bayesian(log_likelihood: float, n_parameters: int, n_observations: int) -> float:
    """BIC = -2 ll + k ln(n)"""
    return -2.0 * log_likelihood + math.log(n_observations) * n_parameters


def fit(
    X: DesignMatrix,
    y: np.ndarray,
    family: Family = Family.POISSON_LOG,
    opts: Optional[FitOptions] = None,
    warn: bool = True,
) -> GlmFit:
    """
    Fit a GLM by IRLS.

    Each iteration solves the weighted least-squares problem through a Householder QR of
    sqrt(W) X. Iteration stops when |dev_t - dev_{t-1}| / (|dev_t| + 0.1) < tolerance.

    Args:
        X: full-rank design matrix, n > p
        y: response vector
        family: poisson-log or gaussian-identity
        opts: stopping rule
        warn: emit ConvergenceWarning on non-convergence

    Returns:
        GlmFit; converged=False if max_iterations was hit
    """
    opts = opts or FitOptions()
    family = Family(family)
    ops = family_ops(family)
    y = np.asarray(y, dtype=float)
    n, p = X.n, X.p

    if y.shape != (n,):
        raise DataValidationError(f"Response has {y.size} entries, design matrix has {n} rows")
    if n <= p:
        raise DataValidationError(f"Need more observations than coefficients (n = {n}, p = {p})")
    ops.check_response(y)
    check_full_rank(X)

    values = X.values
    mu = ops.start_mu(y)
    eta = ops.link(mu)
    dev_old = float(np.sum(ops.deviance_contributions(y, mu)))
    history: List[float] = []
    converged = False
    beta = np.zeros(p)

    for _ in range(opts.max_iterations):
        beta = _irls_step(values, y, eta, mu, ops)
        eta = values @ beta
        mu = ops.inverse_link(eta)
        dev = float(np.sum(ops.deviance_contributions(y, mu)))
        history.append(dev)
        if abs(dev - dev_old) / (abs(dev) + 0.1) < opts.tolerance:
            converged = True
            break
        dev_old = dev

    if not converged and warn:
        warnings.warn(
            f"IRLS did not converge in {opts.max_iterations} iteration(s); last deviance {history[-1]:.6g}",
            ConvergenceWarning,
            stacklevel=2,
        )

    # Covariance from the R factor at the final weights
    _, R, _ = _weighted_qr(values, eta, mu, ops)
    R_inv = linalg.solve_triangular(R, np.eye(p))
    unscaled = R_inv @ R_inv.T

    df_residual = n - p
    if family == Family.GAUSSIAN_IDENTITY:
        dispersion = float(np.sum((y - mu) ** 2)) / df_residual
    else:
        dispersion = 1.0
    covariance = dispersion * (unscaled + unscaled.T) / 2.0

    ll = ops.log_likelihood(y, mu)
    k = p + (1 if family == Family.GAUSSIAN_IDENTITY else 0)

    result = GlmFit(
        family=Family(family),
        column_names=tuple(X.column_names),
        beta=beta,
        covariance=covariance,
        deviance=history[-1],
        null_deviance=_null_deviance(y, ops),
        df_null=n - 1,
        df_residual=df_residual,
        log_likelihood=ll,
        aic=akaike(ll, k),
        bic=bayesian(ll, k, n),
        n=n,
        iterations=len(history),
        converged=converged,
        dispersion=dispersion,
        deviance_history=tuple(history),
        terms=tuple(X.terms),
    )
    logger.debug(f"Fitted {family.value} GLM with p={p} in {result.iterations} iteration(s), deviance {result.deviance:.4f}")
    return result


def predict(fit: GlmFit, X_new: DesignMatrix) -> np.ndarray:
    """Mean vector mu = g^-1(X beta)"""
    if tuple(X_new.column_names) != tuple(fit.column_names):
        raise SchemaError(
            f"Design columns {list(X_new.column_names)} do not match model columns {list(fit.column_names)}"
        )
    return family_ops(fit.family).inverse_link(X_new.values @ fit.beta)


def poisson_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    """D = 2 sum[y ln(y/mu) - (y - mu)], with y ln(y/mu) = 0 at y = 0"""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(y < 0):
        raise DomainError("Poisson deviance needs nonnegative y")
    return float(np.sum(family_ops(Family.POISSON_LOG).deviance_contributions(y, mu)))


def log_likelihood(y: np.ndarray, mu: np.ndarray, family: Family = Family.POISSON_LOG) -> float:
    return family_ops(family).log_likelihood(np.asarray(y, dtype=float), np.asarray(mu, dtype=float))


def aic(fit: GlmFit) -> float:
    return akaike(fit.log_likelihood, fit.n_parameters)


def bic(fit: GlmFit) -> float:
    return bayesian(fit.log_likelihood, fit.n_parameters, fit.n)


def wald_inference(fit: GlmFit) -> List[CoefficientRow]:
    """Estimate, standard error, z and two-sided normal p-value per coefficient"""
    try:
        np.linalg.cholesky(fit.covariance)
    except np.linalg.LinAlgError:
        raise InferenceError("Covariance matrix is not symmetric positive definite")
    if not fit.converged:
        logger.warning("Wald inference on a fit that did not converge")

    std_errors = np.sqrt(np.diag(fit.covariance))
    rows = []
    for name, estimate, se in zip(fit.column_names, fit.beta, std_errors):
        z = float(estimate / se)
        rows.append(
            CoefficientRow(
                name=name,
                estimate=float(estimate),
                std_error=float(se),
                z=z,
                # 2 (1 - Phi(|z|)) without cancellation
                p_value=float(special.erfc(abs(z) / math.sqrt(2.0))),
            )
        )
    return rows


def to_document(fit: GlmFit, response: Optional[str] = None) -> ModelDocument:
    return ModelDocument(
        family=fit.family,
        link=fit.family.link,
        column_names=list(fit.column_names),
        terms=list(fit.terms),
        beta=fit.beta.tolist(),
        covariance=fit.covariance.tolist(),
        n=fit.n,
        deviance=fit.deviance,
        null_deviance=fit.null_deviance,
        df_residual=fit.df_residual,
        log_likelihood=fit.log_likelihood,
        aic=fit.aic,
        bic=fit.bic,
        iterations=fit.iterations,
        converged=fit.converged,
        dispersion=fit.dispersion,
        response=response,
    )


def from_document(doc: ModelDocument) -> GlmFit:
    return GlmFit(
        family=doc.family,
        column_names=tuple(doc.column_names),
        beta=np.array(doc.beta),
        covariance=np.array(doc.covariance),
        deviance=doc.deviance,
        null_deviance=doc.null_deviance,
        df_null=doc.n - 1,
        df_residual=doc.df_residual,
        log_likelihood=doc.log_likelihood,
        aic=doc.aic,
        bic=doc.bic,
        n=doc.n,
        iterations=doc.iterations,
        converged=doc.converged,
        dispersion=doc.dispersion,
        terms=tuple(doc.terms),
    )


def save_model(fit: GlmFit, path: Path, response: Optional[str] = None) -> Path:
    return artifacts.write_json(path, to_document(fit, response))


def load_model(path: Path) -> ModelDocument:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Model file not found: {path}")
    try:
        return ModelDocument.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise InputError(f"Invalid model file {path}: {e}")


def predict_baseline(fit: GlmFit) -> float:
    """Mean at every reference level with all numeric terms at zero: g^-1(b0)"""
    return float(family_ops(fit.family).inverse_link(np.array([fit.coefficient(INTERCEPT)]))[0])

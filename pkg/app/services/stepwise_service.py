"""
Forward stepwise selection over whole terms under AIC or BIC.

A factor enters as a block of dummies. Candidate fits inside one step may run on a
thread pool; results are collected in candidate order, so the decision does not depend
on completion order.
"""

import logging
import math
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

from app.errors import DataValidationError, DomainError, SingularDesignError
from app.models.glm import Criterion, Family, FitOptions, GlmFit
from app.models.selection import (
    NONE_ROW,
    CandidateRecord,
    CandidateScore,
    SelectionStep,
    SelectionTrace,
    StepRecord,
    TraceDocument,
)
from app.models.table import FactorSpec, RawTable
from app.services import glm_service
from app.services.design_service import encode

logger = logging.getLogger(__name__)


def criterion_value(fit: GlmFit, criterion: Criterion) -> float:
    if Criterion(criterion) == Criterion.AIC:
        return glm_service.aic(fit)
    return glm_service.bic(fit)


@dataclass(frozen=True)
class _Attempt:
    """Outcome of one candidate fit; fit is None when the design was rank deficient or the fit broke down"""
    fit: Optional[GlmFit]
    p: int
    error: Optional[str] = None
    singular: bool = True


class _CandidateFitter:
    """Fits train ~ terms; shared read-only across worker threads"""

    def __init__(self, train: RawTable, specs: Sequence[FactorSpec], response: str, family: Family, opts: FitOptions):
        self.train = train
        self.specs = list(specs)
        self.response = response
        self.family = family
        self.opts = opts

    def __call__(self, terms: Sequence[str]) -> GlmFit:
        X, y = encode(self.train, self.specs, list(terms), self.response)
        return glm_service.fit(X, y, self.family, self.opts, warn=False)

    def attempt(self, terms: Sequence[str]) -> _Attempt:
        X, y = encode(self.train, self.specs, list(terms), self.response)
        try:
            return _Attempt(glm_service.fit(X, y, self.family, self.opts, warn=False), X.p)
        except SingularDesignError as e:
            return _Attempt(None, X.p, str(e))
        except DomainError as e:
            return _Attempt(None, X.p, str(e), singular=False)


def _score(term: str, attempt: _Attempt, current_p: int, criterion: Criterion, notes: List[str]) -> CandidateScore:
    """Criterion of one candidate; +inf when its fit is rank deficient, broke down or did not converge"""
    fit = attempt.fit
    if fit is None:
        problem = f"design with '{term}' is rank deficient" if attempt.singular else f"fit with '{term}' failed"
        notes.append(f"{problem}; scored +inf")
        logger.warning(f"Candidate '{term}' skipped: {attempt.error}")
        return CandidateScore(term=term, df=attempt.p - current_p, deviance=math.inf, criterion=math.inf, converged=False)

    if fit.converged:
        score = criterion_value(fit, criterion)
    else:
        score = math.inf
        notes.append(f"fit with '{term}' did not converge; scored +inf")
        logger.warning(f"Candidate '{term}' did not converge in {fit.iterations} iteration(s)")
    return CandidateScore(term=term, df=fit.p - current_p, deviance=fit.deviance, criterion=score, converged=fit.converged)


def forward_select(
    train: RawTable,
    specs: Sequence[FactorSpec],
    candidates: Sequence[str],
    response: str,
    family: Family = Family.POISSON_LOG,
    criterion: Criterion = Criterion.BIC,
    opts: Optional[FitOptions] = None,
    jobs: int = 1,
) -> SelectionTrace:
    """
    Greedy forward search starting from the intercept-only model.

    Args:
        train: cleaned training table
        specs: factor specs for categorical candidates
        candidates: term names; their order breaks criterion ties (earlier wins)
        response: count response column
        family: GLM family
        criterion: aic or bic, charged on the full coefficient count of each fit
        opts: IRLS stopping rule
        jobs: worker threads for candidate fits within a step

    Returns:
        SelectionTrace with every round, the final term set and its refit
    """
    candidates = list(candidates)
    if not candidates:
        raise DataValidationError("forward selection needs at least one candidate term")
    if len(set(candidates)) != len(candidates):
        raise DataValidationError(f"duplicate candidate terms in {candidates}")

    criterion = Criterion(criterion)
    fitter = _CandidateFitter(train, specs, response, Family(family), opts or FitOptions())

    current: List[str] = []
    current_fit = fitter(current)
    current_score = criterion_value(current_fit, criterion)
    steps: List[SelectionStep] = []

    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        while True:
            remaining = [t for t in candidates if t not in current]
            if not remaining:
                steps.append(
                    SelectionStep(tuple(current), (), current_score, current_fit.deviance, None, current_score)
                )
                break

            term_sets = [current + [t] for t in remaining]
            attempts = list(pool.map(fitter.attempt, term_sets)) if pool else [fitter.attempt(ts) for ts in term_sets]

            scores = []
            notes = []
            for term, attempt in zip(remaining, attempts):
                scores.append(_score(term, attempt, current_fit.p, criterion, notes))

            best = 0
            for i, score in enumerate(scores):
                if score.criterion < scores[best].criterion:
                    best = i

            if scores[best].criterion < current_score:
                chosen = scores[best].term
                steps.append(
                    SelectionStep(
                        tuple(current),
                        tuple(scores),
                        current_score,
                        current_fit.deviance,
                        chosen,
                        scores[best].criterion,
                        tuple(notes),
                    )
                )
                logger.info(f"+ {chosen}: {criterion.value.upper()} {current_score:.2f} -> {scores[best].criterion:.2f}")
                current = current + [chosen]
                current_fit = attempts[best].fit
                current_score = scores[best].criterion
            else:
                steps.append(
                    SelectionStep(
                        tuple(current),
                        tuple(scores),
                        current_score,
                        current_fit.deviance,
                        None,
                        current_score,
                        tuple(notes),
                    )
                )
                break
    finally:
        if pool:
            pool.shutdown()

    final_fit = fitter(current)
    return SelectionTrace(
        criterion=criterion,
        response=response,
        steps=tuple(steps),
        final_terms=tuple(current),
        final_fit=final_fit,
    )


def formula(response: str, terms: Sequence[str]) -> str:
    return f"{response} ~ {' + '.join(terms) if terms else '1'}"


def _fmt(value: float) -> str:
    return "Inf" if math.isinf(value) else f"{value:.2f}"


def format_trace(trace: SelectionTrace) -> str:
    """
    Plain-text trace: per step, the current formula and a table of candidate
    additions and <none> sorted by criterion.
    """
    label = trace.criterion.value.upper()
    lines: List[str] = []
    for i, step in enumerate(trace.steps):
        header = "Start" if i == 0 else "Step"
        lines.append(f"{header}:  {label}={step.no_change_score:.2f}")
        lines.append(formula(trace.response, step.current_terms))
        lines.append("")

        rows = [(f"+ {c.term}", str(c.df), c.deviance, c.criterion) for c in step.candidates]
        rows.append((NONE_ROW, "", step.no_change_deviance, step.no_change_score))
        rows.sort(key=lambda r: r[3])

        name_width = max(len(r[0]) for r in rows)
        lines.append(f"{'':<{name_width}} {'Df':>3} {'Deviance':>12} {label:>12}")
        for name, df, deviance, score in rows:
            lines.append(f"{name:<{name_width}} {df:>3} {_fmt(deviance):>12} {_fmt(score):>12}")
        for note in step.warnings:
            lines.append(f"Warning: {note}")
        lines.append("")

    lines.append(f"Selected: {formula(trace.response, trace.final_terms)}")
    return "\n".join(lines) + "\n"


def trace_document(trace: SelectionTrace) -> TraceDocument:
    def finite(value: float) -> Optional[float]:
        return None if math.isinf(value) else value

    return TraceDocument(
        criterion=trace.criterion,
        response=trace.response,
        steps=[
            StepRecord(
                current_terms=list(step.current_terms),
                candidates=[
                    CandidateRecord(
                        term=c.term,
                        df=c.df,
                        deviance=finite(c.deviance),
                        criterion=finite(c.criterion),
                        converged=c.converged,
                    )
                    for c in step.candidates
                ],
                no_change_score=step.no_change_score,
                no_change_deviance=step.no_change_deviance,
                chosen=step.chosen,
                criterion_after=step.criterion_after,
                warnings=list(step.warnings),
            )
            for step in trace.steps
        ],
        final_terms=list(trace.final_terms),
        final_criterion=criterion_value(trace.final_fit, trace.criterion),
    )

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel

from app.models.glm import Criterion, GlmFit

NONE_ROW = "<none>"


@dataclass(frozen=True)
class CandidateScore:
    """One '+ term' row of a selection step"""
    term: str
    df: int
    deviance: float
    criterion: float
    converged: bool = True


@dataclass(frozen=True)
class SelectionStep:
    """
    One round of forward selection.

    ``chosen`` is None when the round stopped the search (no candidate beat the
    current model strictly, or none remained).
    """
    current_terms: Tuple[str, ...]
    candidates: Tuple[CandidateScore, ...]
    no_change_score: float
    no_change_deviance: float
    chosen: Optional[str]
    criterion_after: float
    warnings: Tuple[str, ...] = ()

    @property
    def candidate_scores(self) -> Dict[str, float]:
        return {c.term: c.criterion for c in self.candidates}

    @property
    def accepted(self) -> bool:
        return self.chosen is not None


@dataclass(frozen=True)
class SelectionTrace:
    criterion: Criterion
    response: str
    steps: Tuple[SelectionStep, ...]
    final_terms: Tuple[str, ...]
    final_fit: GlmFit = field(repr=False)

    @property
    def accepted_steps(self) -> List[SelectionStep]:
        return [s for s in self.steps if s.accepted]


class CandidateRecord(BaseModel):
    term: str
    df: int
    # None when the candidate could not be scored (rank deficient or not converged)
    deviance: Optional[float] = None
    criterion: Optional[float] = None
    converged: bool


class StepRecord(BaseModel):
    current_terms: List[str]
    candidates: List[CandidateRecord]
    no_change_score: float
    no_change_deviance: float
    chosen: Optional[str]
    criterion_after: float
    warnings: List[str]


class TraceDocument(BaseModel):
    """JSON form of a SelectionTrace at full precision"""
    criterion: Criterion
    response: str
    steps: List[StepRecord]
    final_terms: List[str]
    final_criterion: float

import itertools

import numpy as np
import pytest

from app.errors import DataValidationError, DomainError
from app.models.glm import Criterion, FitOptions
from app.models.selection import NONE_ROW
from app.models.table import ColumnKind
from app.services import glm_service
from app.services.design_service import encode
from app.services.preprocess_service import build_factor_specs
from app.services.stepwise_service import criterion_value, format_trace, forward_select, trace_document
from tests.conftest import make_table

CANDIDATES = ["x1", "x2", "x3", "x4", "g"]


def instance(seed, n=120):
    rng = np.random.default_rng(seed)
    xs = {f"x{j}": rng.integers(0, 10, size=n) for j in range(1, 5)}
    g = rng.choice(["a", "b", "c"], size=n, p=[0.5, 0.3, 0.2])
    effects = rng.choice([0.0, 0.08], size=4)
    eta = 0.3 + sum(b * xs[f"x{j}"] for j, b in zip(range(1, 5), effects)) + np.where(g == "b", 0.3 * rng.integers(0, 2), 0.0)
    days = rng.poisson(np.exp(eta))
    columns = {"days": (ColumnKind.COUNT, days.tolist())}
    columns.update({name: (ColumnKind.COUNT, values.tolist()) for name, values in xs.items()})
    columns["g"] = (ColumnKind.CATEGORICAL, g.tolist())
    table = make_table(columns)
    return table, build_factor_specs(table)


def exhaustive_best(table, specs, candidates, criterion):
    best = np.inf
    for k in range(len(candidates) + 1):
        for subset in itertools.combinations(candidates, k):
            X, y = encode(table, specs, list(subset), "days")
            best = min(best, criterion_value(glm_service.fit(X, y), criterion))
    return best


class TestForwardSelect:
    def test_never_beats_exhaustive_search(self):
        for seed in range(50):
            table, specs = instance(seed)
            trace = forward_select(table, specs, CANDIDATES, "days", criterion=Criterion.BIC)
            final = criterion_value(trace.final_fit, Criterion.BIC)
            assert final >= exhaustive_best(table, specs, CANDIDATES, Criterion.BIC) - 1e-9

    def test_criterion_strictly_decreases(self):
        for seed in range(20):
            table, specs = instance(seed)
            trace = forward_select(table, specs, CANDIDATES, "days", criterion=Criterion.AIC)
            start = trace.steps[0].no_change_score
            previous = start
            for step in trace.accepted_steps:
                assert step.criterion_after < step.no_change_score
                assert step.criterion_after < previous
                previous = step.criterion_after
            assert criterion_value(trace.final_fit, Criterion.AIC) <= start

    def test_records_stop_round(self):
        table, specs = instance(3)
        trace = forward_select(table, specs, CANDIDATES, "days")
        last = trace.steps[-1]
        assert last.chosen is None
        assert list(trace.final_terms) == [s.chosen for s in trace.accepted_steps]
        assert last.criterion_after == pytest.approx(criterion_value(trace.final_fit, Criterion.BIC))

    def test_chosen_minimizes_candidates(self):
        table, specs = instance(4)
        trace = forward_select(table, specs, CANDIDATES, "days")
        for step in trace.accepted_steps:
            assert step.candidate_scores[step.chosen] == min(step.candidate_scores.values())

    def test_parallel_matches_serial(self):
        for seed in range(5):
            table, specs = instance(seed)
            serial = forward_select(table, specs, CANDIDATES, "days", jobs=1)
            parallel = forward_select(table, specs, CANDIDATES, "days", jobs=4)
            assert trace_document(serial).model_dump() == trace_document(parallel).model_dump()

    def test_single_improving_candidate(self):
        x = np.arange(120) % 10
        days = np.random.default_rng(1).poisson(np.exp(0.2 + 0.15 * x))
        table = make_table({"days": (ColumnKind.COUNT, days.tolist()), "x": (ColumnKind.COUNT, x.tolist())})
        trace = forward_select(table, [], ["x"], "days")
        assert trace.final_terms == ("x",)
        assert len(trace.accepted_steps) == 1
        assert trace.steps[-1].candidates == ()

    def test_tie_goes_to_earlier_candidate(self):
        rng = np.random.default_rng(2)
        x = rng.integers(0, 10, size=100)
        days = rng.poisson(np.exp(0.2 + 0.12 * x))
        table = make_table(
            {
                "days": (ColumnKind.COUNT, days.tolist()),
                "x": (ColumnKind.COUNT, x.tolist()),
                "x_copy": (ColumnKind.COUNT, x.tolist()),
            }
        )
        trace = forward_select(table, [], ["x", "x_copy"], "days")
        first = trace.steps[0].candidate_scores
        assert first["x"] == first["x_copy"]
        assert trace.final_terms == ("x",)

        swapped = forward_select(table, [], ["x_copy", "x"], "days", jobs=2)
        assert swapped.final_terms == ("x_copy",)

    def test_aliased_candidate_scored_infinite(self):
        rng = np.random.default_rng(2)
        x = rng.integers(0, 10, size=100)
        days = rng.poisson(np.exp(0.2 + 0.12 * x))
        table = make_table(
            {
                "days": (ColumnKind.COUNT, days.tolist()),
                "x": (ColumnKind.COUNT, x.tolist()),
                "x_copy": (ColumnKind.COUNT, x.tolist()),
            }
        )
        trace = forward_select(table, [], ["x", "x_copy"], "days")
        stop = trace.steps[-1]
        assert stop.candidate_scores["x_copy"] == np.inf
        assert any("x_copy" in note for note in stop.warnings)

    def test_non_converged_candidates_score_infinite(self):
        table, specs = instance(5)
        trace = forward_select(table, specs, CANDIDATES, "days", opts=FitOptions(max_iterations=1))
        first = trace.steps[0]
        assert all(score == np.inf for score in first.candidate_scores.values())
        assert len(first.warnings) == len(CANDIDATES)
        assert trace.final_terms == ()

    def test_failed_candidate_fit_scored_infinite(self, monkeypatch):
        table, specs = instance(10)
        original = glm_service.fit

        def fit_failing_on_x2(X, y, *args, **kwargs):
            if "x2" in X.column_names:
                raise DomainError("Fitted mean is not finite")
            return original(X, y, *args, **kwargs)

        monkeypatch.setattr(glm_service, "fit", fit_failing_on_x2)
        trace = forward_select(table, specs, CANDIDATES, "days")
        first = trace.steps[0]
        assert first.candidate_scores["x2"] == np.inf
        assert any("x2" in note for note in first.warnings)
        assert "x2" not in trace.final_terms
        assert trace_document(trace).steps[0].candidates[1].criterion is None

    def test_factor_enters_as_block(self):
        table, specs = instance(6)
        trace = forward_select(table, specs, CANDIDATES, "days")
        (g,) = [c for c in trace.steps[0].candidates if c.term == "g"]
        assert g.df == 2

    def test_candidate_list_checks(self):
        table, specs = instance(0)
        with pytest.raises(DataValidationError):
            forward_select(table, specs, [], "days")
        with pytest.raises(DataValidationError):
            forward_select(table, specs, ["x1", "x1"], "days")


class TestTraceOutput:
    def test_text_layout(self):
        table, specs = instance(7)
        trace = forward_select(table, specs, CANDIDATES, "days")
        text = format_trace(trace)
        lines = text.splitlines()
        assert lines[0].startswith("Start:  BIC=")
        assert lines[1] == "days ~ 1"
        assert text.count(NONE_ROW) == len(trace.steps)
        assert lines[-1].startswith("Selected: days ~")

    def test_rows_sorted_by_criterion(self):
        table, specs = instance(8)
        trace = forward_select(table, specs, CANDIDATES, "days")
        block = format_trace(trace).split("\n\n")[1]
        scores = [float(line.split()[-1]) for line in block.splitlines()[1:]]
        assert scores == sorted(scores)

    def test_document_keeps_full_precision(self):
        table, specs = instance(9)
        trace = forward_select(table, specs, CANDIDATES, "days")
        doc = trace_document(trace)
        assert doc.final_terms == list(trace.final_terms)
        assert doc.steps[0].no_change_score == trace.steps[0].no_change_score
        assert len(doc.steps) == len(trace.steps)

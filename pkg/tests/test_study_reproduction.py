"""
Checks against the known figures of the 10,000-encounter study extract.

Runs only when LOS_STUDY_DATA points at the extract. Counts and descriptives are exact;
split-dependent figures get tolerances of a few standard errors since the original
partition cannot be reproduced.
"""

import math

import numpy as np
import pytest

from app.models.design import SplitSpec
from app.models.glm import Criterion
from app.services import diagnostics_service, glm_service, ingest_service, preprocess_service
from app.services.design_service import encode, split
from app.services.stepwise_service import criterion_value, forward_select

SEEDS = [20080101, 1, 2, 3, 4]


@pytest.fixture
def study(study_csv):
    raw = ingest_service.load_csv(study_csv, ingest_service.STUDY_SCHEMA)
    return preprocess_service.run_recipe(raw)


def predictors(table):
    return [name for name in table.column_names if name != "days"]


def test_cleaning_counts(study):
    table, _, report = study
    assert report.rows_out == 9997
    assert report.race_recode_counts == {"Missing": 226, "AfricanAmerican": 1848, "Other": 392, "Caucasian": 7531}
    admit = table.column("admit_type_id").value_counts()
    assert {level: int(admit[level]) for level in ["1", "2", "3", "4"]} == {"1": 5289, "2": 1870, "3": 1817, "4": 1021}


def test_descriptives(study):
    table, _, _ = study
    assert diagnostics_service.overall_stat(table, "days").mean == pytest.approx(4.409223, abs=5e-6)
    meds = ingest_service.column_summary(table, "num_meds")
    assert meds.min == 1 and meds.max == 67
    assert meds.mean == pytest.approx(16.16, abs=0.005)
    days = table.column("days").to_numpy(dtype=float)
    num_meds = table.column("num_meds").to_numpy(dtype=float)
    assert diagnostics_service.correlation(num_meds, days) == pytest.approx(0.472, abs=0.001)


def test_readmission_groups(study):
    table, _, _ = study
    groups = diagnostics_service.group_means(table, "readmitted", "days")
    expected = {"NO": (4.23, 5370), "<30": (4.77, 1102), ">30": (4.57, 3525)}
    for level, (mean, n) in expected.items():
        assert groups[level].n == n
        assert groups[level].mean == pytest.approx(mean, abs=0.005)


def test_age_groups(study):
    table, _, _ = study
    groups = diagnostics_service.group_means(table, "age", "days")
    expected = {
        "[70-80)": (4.66, 2541),
        "[0-10)": (3.22, 18),
        "[10-20)": (3.12, 72),
        "[20-30)": (3.52, 145),
        "[30-40)": (3.80, 372),
        "[40-50)": (3.99, 931),
        "[50-60)": (4.09, 1726),
        "[60-70)": (4.41, 2228),
        "[80-90)": (4.82, 1676),
        "[90-100)": (4.74, 288),
    }
    assert next(iter(groups)) == "[70-80)"
    for level, (mean, n) in expected.items():
        assert groups[level].n == n
        assert groups[level].mean == pytest.approx(mean, abs=0.005)


def first_selected_term(train, specs, terms):
    """Term forward selection by BIC adds first, or None if none beats the intercept-only model"""
    X, y = encode(train, specs, [], "days")
    best_term, best_score = None, criterion_value(glm_service.fit(X, y), Criterion.BIC)
    for term in terms:
        X, y = encode(train, specs, [term], "days")
        score = criterion_value(glm_service.fit(X, y, warn=False), Criterion.BIC)
        if score < best_score:
            best_term, best_score = term, score
    return best_term


def test_num_meds_enters_first_across_seeds(study):
    table, specs, _ = study
    terms = predictors(table)
    first = []
    for seed in range(100):
        train, _ = split(table, SplitSpec(seed=seed, train_size=7000))
        first.append(first_selected_term(train, specs, terms))
    assert first.count("num_meds") >= 95


@pytest.mark.parametrize("seed", SEEDS)
def test_train_mean_within_three_standard_errors(study, seed):
    table, _, _ = study
    train, _ = split(table, SplitSpec(seed=seed, train_size=7000))
    days = table.column("days").to_numpy(dtype=float)
    standard_error = days.std(ddof=1) / math.sqrt(7000)
    assert abs(diagnostics_service.overall_stat(train, "days").mean - 4.409) <= 3 * standard_error


@pytest.mark.parametrize("seed", SEEDS)
def test_models_across_seeds(study, seed):
    table, specs, _ = study
    train, test = split(table, SplitSpec(seed=seed, train_size=7000))
    terms = predictors(table)

    X, y = encode(train, specs, terms, "days")
    full = glm_service.fit(X, y)
    assert full.coefficient("num_meds") == pytest.approx(0.0308567, abs=0.003)
    assert full.coefficient("(Intercept)") == pytest.approx(0.7180159, abs=0.10)

    X_test, y_test = encode(test, specs, terms, "days")
    pearson = diagnostics_service.pearson_statistic(y_test, glm_service.predict(full, X_test))
    assert pearson == pytest.approx(1.558, abs=0.10)

    trace = forward_select(train, specs, terms, "days", criterion=Criterion.BIC, jobs=4)
    assert glm_service.predict_baseline(trace.final_fit) == pytest.approx(1.99, abs=0.15)
    assert math.isclose(glm_service.predict_baseline(trace.final_fit), math.exp(trace.final_fit.beta[0]))
    assert np.isfinite(trace.final_fit.bic)

import json
import math

import numpy as np
import pandas as pd
import pytest

from app.main import run
from tests.conftest import synthetic_extract, write_frame


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def prepped(raw_csv, tmp_path):
    out = tmp_path / "prep"
    assert run(["prep", "--input", str(raw_csv), "--output-dir", str(out)]) == 0
    return out


class TestPrep:
    def test_artifacts(self, prepped):
        report = read_json(prepped / "cleaning_report.json")
        assert report["rows_in"] == 600
        assert report["rows_out"] == 598
        specs = read_json(prepped / "factor_specs.json")
        assert [s["variable"] for s in specs] == ["gender", "age", "race", "admit_type_id", "metformin", "insulin", "readmitted"]
        header = (prepped / "cleaned.csv").read_text(encoding="utf-8").splitlines()[0]
        assert "weight" not in header.split(",")

    def test_idempotent(self, raw_csv, prepped, tmp_path):
        again = tmp_path / "again"
        assert run(["prep", "--input", str(raw_csv), "--output-dir", str(again)]) == 0
        assert tree_bytes(again) == tree_bytes(prepped)

    def test_already_clean_input_is_identity(self, prepped, tmp_path):
        out = tmp_path / "reprep"
        assert run(["prep", "--input", str(prepped / "cleaned.csv"), "--output-dir", str(out)]) == 0
        assert (out / "cleaned.csv").read_bytes() == (prepped / "cleaned.csv").read_bytes()
        report = read_json(out / "cleaning_report.json")
        assert report["rows_removed_gender"] == 0
        assert report["columns_dropped"] == []

    def test_missing_input_exits_2(self, tmp_path, caplog):
        assert run(["prep", "--input", str(tmp_path / "nope.csv"), "--output-dir", str(tmp_path / "out")]) == 2
        assert "nope.csv" in caplog.text
        assert not (tmp_path / "out" / "cleaned.csv").exists()

    def test_invalid_config_exits_2(self, raw_csv, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"train_fraction": 1.5}), encoding="utf-8")
        assert run(["split", "--input", str(raw_csv), "--config", str(config)]) == 2

    def test_header_mismatch_exits_3(self, tmp_path):
        frame = synthetic_extract(20).drop(columns=["num_ip"])
        path = write_frame(frame, tmp_path / "short.csv")
        assert run(["prep", "--input", str(path), "--output-dir", str(tmp_path / "out")]) == 3


class TestEda:
    def test_artifacts(self, raw_csv, tmp_path):
        out = tmp_path / "eda"
        assert run(["eda", "--input", str(raw_csv), "--output-dir", str(out)]) == 0
        groups = read_json(out / "group_means.json")
        assert sum(stat["n"] for stat in groups["readmitted"].values()) == 598
        assert (out / "group_means.txt").read_text(encoding="utf-8").startswith("ALL: mean ")
        correlation = pd.read_csv(out / "correlation.csv", index_col="column")
        assert correlation.loc["num_meds", "days"] == pytest.approx(correlation.loc["days", "num_meds"])
        distribution = pd.read_csv(out / "days_distribution.csv")
        assert distribution["count"].sum() == 598

    def test_empty_table_prints_headers(self, tmp_path):
        path = write_frame(synthetic_extract(0, invalid_gender=0), tmp_path / "empty.csv")
        out = tmp_path / "eda"
        assert run(["eda", "--input", str(path), "--output-dir", str(out)]) == 0
        summary = (out / "summary.txt").read_text(encoding="utf-8")
        assert "days" in summary and "num_diags" in summary


class TestSplit:
    def test_sizes_and_override(self, raw_csv, tmp_path):
        out = tmp_path / "split"
        assert run(["split", "--input", str(raw_csv), "--output-dir", str(out), "--train-size", "500", "--seed", "4"]) == 0
        doc = read_json(out / "split.json")
        assert doc["train_size"] == 500 and doc["test_size"] == 98
        assert sorted(doc["train_rows"] + doc["test_rows"]) == list(range(1, 599))
        assert len(pd.read_csv(out / "train.csv")) == 500

    def test_partition_means(self, raw_csv, tmp_path):
        out = tmp_path / "split"
        assert run(["split", "--input", str(raw_csv), "--output-dir", str(out)]) == 0
        doc = read_json(out / "split.json")
        train = pd.read_csv(out / "train.csv")["days"]
        test = pd.read_csv(out / "test.csv")["days"]
        assert doc["train_mean"] == pytest.approx(train.mean(), rel=1e-12)
        assert doc["test_mean"] == pytest.approx(test.mean(), rel=1e-12)
        assert doc["all_mean"] == pytest.approx(pd.concat([train, test]).mean(), rel=1e-12)


class TestArguments:
    def test_unknown_log_level_is_a_usage_error(self, raw_csv):
        with pytest.raises(SystemExit) as info:
            run(["prep", "--input", str(raw_csv), "--log-level", "bogus"])
        assert info.value.code == 2

    def test_log_level_is_case_insensitive(self, raw_csv, tmp_path):
        assert run(["prep", "--input", str(raw_csv), "--output-dir", str(tmp_path), "--log-level", "debug"]) == 0


class TestModelCommands:
    def test_fit(self, raw_csv, tmp_path):
        out = tmp_path / "fit"
        assert run(["fit", "--input", str(raw_csv), "--output-dir", str(out), "--explain"]) == 0
        model = read_json(out / "model.json")
        assert model["column_names"][0] == "(Intercept)"
        assert "num_meds" in model["column_names"]
        text = (out / "coefficients.txt").read_text(encoding="utf-8")
        assert "Coefficients:" in text
        assert "exp(Estimate)" in text
        assert "Signif. codes:" in text
        assert "WARNING" not in text

    def test_dump_matrix(self, raw_csv, tmp_path):
        out = tmp_path / "fit"
        assert run(["fit", "--input", str(raw_csv), "--output-dir", str(out), "--terms", "num_meds,age", "--dump-matrix"]) == 0
        model = read_json(out / "model.json")
        matrix = pd.read_csv(out / "design_matrix.csv")
        assert list(matrix.columns) == model["column_names"]
        assert len(matrix) == model["n"]
        assert (matrix["(Intercept)"] == 1.0).all()

    def test_intercept_only(self, raw_csv, tmp_path):
        out = tmp_path / "null"
        assert run(["fit", "--input", str(raw_csv), "--output-dir", str(out), "--terms", "", "--seed", "8"]) == 0
        split_dir = tmp_path / "split"
        assert run(["split", "--input", str(raw_csv), "--output-dir", str(split_dir), "--seed", "8"]) == 0
        train = pd.read_csv(split_dir / "train.csv")
        (beta0,) = read_json(out / "model.json")["beta"]
        assert beta0 == pytest.approx(math.log(train["days"].mean()), abs=1e-8)

    def test_non_convergence_banner(self, raw_csv, tmp_path):
        out = tmp_path / "fit"
        assert run(["fit", "--input", str(raw_csv), "--output-dir", str(out), "--max-iterations", "1"]) == 0
        assert (out / "coefficients.txt").read_text(encoding="utf-8").startswith("WARNING")

    def test_select(self, raw_csv, tmp_path):
        out = tmp_path / "select"
        assert run(["select", "--input", str(raw_csv), "--output-dir", str(out), "--jobs", "2"]) == 0
        trace = read_json(out / "trace.json")
        assert trace["criterion"] == "bic"
        assert trace["final_terms"][0] == "num_meds"
        assert (out / "trace.txt").read_text(encoding="utf-8").startswith("Start:  BIC=")
        model = read_json(out / "model.json")
        assert set(model["terms"][i]["name"] for i in range(len(model["terms"]))) == set(trace["final_terms"])


class TestEvaluateCommands:
    @pytest.fixture
    def model_path(self, raw_csv, tmp_path):
        out = tmp_path / "fit"
        assert run(["fit", "--input", str(raw_csv), "--output-dir", str(out)]) == 0
        return out / "model.json"

    def test_diagnose_report_matches_predictions(self, raw_csv, model_path, tmp_path):
        out = tmp_path / "diag"
        assert run(["diagnose", "--input", str(raw_csv), "--output-dir", str(out), "--model", str(model_path)]) == 0
        report = read_json(out / "report.json")
        train, test = report["partitions"]
        assert (train["partition"], test["partition"]) == ("train", "test")

        preds = pd.read_csv(out / "preds.csv")
        y, mu = preds["y"].to_numpy(), preds["mu"].to_numpy()
        assert test["metrics"]["n"] == len(preds)
        assert test["metrics"]["mae"] == pytest.approx(np.mean(np.abs(y - mu)), rel=1e-12)
        assert test["metrics"]["rmse"] == pytest.approx(np.sqrt(np.mean((y - mu) ** 2)), rel=1e-12)
        assert test["pearson"]["per_observation"] == pytest.approx(np.mean((y - mu) ** 2 / mu), rel=1e-12)
        assert train["pearson"]["per_df"] is not None

        qq = pd.read_csv(out / "qq.csv")
        assert list(qq.columns) == ["theoretical", "sample"]
        assert qq["sample"].is_monotonic_increasing
        residuals = pd.read_csv(out / "residuals_vs_fitted.csv")
        assert np.sum(residuals["residual"] ** 2) == pytest.approx(train["deviance"], rel=1e-9)

    def test_diagnose_needs_model(self, raw_csv, tmp_path):
        assert run(["diagnose", "--input", str(raw_csv), "--output-dir", str(tmp_path)]) == 2

    def test_predict_explain_identity(self, model_path, prepped, tmp_path):
        out = tmp_path / "pred"
        argv = ["predict", "--model", str(model_path), "--newdata", str(prepped / "cleaned.csv"), "--output-dir", str(out), "--explain"]
        assert run(argv) == 0
        preds = pd.read_csv(out / "predictions.csv")
        assert len(preds) == 598
        factors = preds.drop(columns=["row_id", "mu", "baseline"])
        reconstructed = preds["baseline"] * factors.prod(axis=1)
        np.testing.assert_allclose(reconstructed, preds["mu"], rtol=1e-12)

    @pytest.fixture
    def small_model(self, raw_csv, tmp_path):
        out = tmp_path / "small"
        assert run(["fit", "--input", str(raw_csv), "--output-dir", str(out), "--terms", "num_meds,race"]) == 0
        return out / "model.json"

    def cleaned_rows(self, prepped):
        return pd.read_csv(prepped / "cleaned.csv", dtype=str, keep_default_na=False)

    def test_predict_without_response_column(self, small_model, prepped, tmp_path):
        rows = self.cleaned_rows(prepped)
        path = write_frame(rows.drop(columns=["days"]), tmp_path / "new.csv")
        out = tmp_path / "pred"
        argv = ["predict", "--model", str(small_model), "--newdata", str(path), "--output-dir", str(out)]
        assert run(argv) == 0
        assert len(pd.read_csv(out / "predictions.csv")) == len(rows)

    def test_predict_with_only_model_terms(self, small_model, prepped, tmp_path):
        rows = self.cleaned_rows(prepped)
        path = write_frame(rows[["race", "num_meds"]], tmp_path / "new.csv")
        out = tmp_path / "pred"
        argv = ["predict", "--model", str(small_model), "--newdata", str(path), "--output-dir", str(out)]
        assert run(argv) == 0

        full = tmp_path / "full"
        argv = ["predict", "--model", str(small_model), "--newdata", str(prepped / "cleaned.csv"), "--output-dir", str(full)]
        assert run(argv) == 0
        assert (out / "predictions.csv").read_bytes() == (full / "predictions.csv").read_bytes()

    def test_out_of_vocabulary_level_exits_3(self, small_model, prepped, tmp_path, caplog):
        rows = self.cleaned_rows(prepped)[["race", "num_meds"]].head(3).copy()
        rows.loc[1, "race"] = "Pacific"
        path = write_frame(rows, tmp_path / "new.csv")
        argv = ["predict", "--model", str(small_model), "--newdata", str(path), "--output-dir", str(tmp_path / "p")]
        assert run(argv) == 3
        assert "Pacific" in caplog.text
        assert not (tmp_path / "p" / "predictions.csv").exists()

    def test_unseen_level_exits_3(self, tmp_path, caplog):
        frame = synthetic_extract(300)
        frame["age"] = frame["age"].replace("[0-10)", "[10-20)")
        raw = write_frame(frame, tmp_path / "raw.csv")
        fit_dir = tmp_path / "fit"
        assert run(["fit", "--input", str(raw), "--output-dir", str(fit_dir)]) == 0
        assert run(["prep", "--input", str(raw), "--output-dir", str(tmp_path / "prep")]) == 0

        newdata = pd.read_csv(tmp_path / "prep" / "cleaned.csv", dtype=str, keep_default_na=False).head(3)
        newdata.loc[1, "age"] = "[0-10)"
        path = write_frame(newdata, tmp_path / "new.csv")
        argv = ["predict", "--model", str(fit_dir / "model.json"), "--newdata", str(path), "--output-dir", str(tmp_path / "p")]
        assert run(argv) == 3
        assert "[0-10)" in caplog.text


class TestReport:
    def test_end_to_end_is_reproducible(self, raw_csv, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            assert run(["report", "--input", str(raw_csv), "--output-dir", str(out), "--train-size", "420"]) == 0

        files = tree_bytes(first)
        for name in [
            "cleaned.csv",
            "cleaning_report.json",
            "factor_specs.json",
            "eda/summary.txt",
            "eda/group_means.json",
            "split/split.json",
            "full/model.json",
            "full/coefficients.txt",
            "selected/trace.txt",
            "selected/trace.json",
            "selected/model.json",
            "diagnostics/full/report.json",
            "diagnostics/selected/preds.csv",
            "summary.json",
        ]:
            assert name in files
        assert files == tree_bytes(second)

        summary = read_json(first / "summary.json")
        selected = read_json(first / "selected" / "model.json")
        assert summary["baseline_prediction"] == pytest.approx(math.exp(selected["beta"][0]))
        assert summary["train_size"] == 420
        split = read_json(first / "split" / "split.json")
        for key in ("train_mean", "test_mean", "all_mean"):
            assert summary[key] == split[key]

import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from grainfuse.cli import main
from grainfuse.datamodel import TARGET_COLUMN, load_csv
from grainfuse.serialization import load_model


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def invoke(runner):
    def _invoke(*args, exit_code=0):
        result = runner.invoke(main, [str(arg) for arg in args])
        assert result.exit_code == exit_code, result.output
        return result

    return _invoke


@pytest.fixture
def telemetry(invoke, tmp_path):
    path = tmp_path / "telemetry.csv"
    invoke("synth", "--days", 60, "--seed", 1, "--out", path)
    return path


class TestSynth:
    def test_default_days(self, invoke, tmp_path):
        path = tmp_path / "out.csv"
        result = invoke("synth", "--out", path)
        assert "Wrote 524 rows" in result.output
        frame = pd.read_csv(path)
        assert len(frame) == 524
        assert list(frame.columns) == [
            "timestamp",
            "warehouse_temp",
            "warehouse_humidity",
            "air_temp",
            "air_humidity",
            "grain_temp",
        ]

    def test_byte_identical(self, invoke, tmp_path):
        invoke("synth", "--days", 30, "--seed", 7, "--out", tmp_path / "a.csv")
        invoke("synth", "--days", 30, "--seed", 7, "--out", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_zero_days_is_a_usage_error(self, invoke, tmp_path):
        invoke("synth", "--days", 0, "--out", tmp_path / "a.csv", exit_code=2)


class TestReport:
    def test_all_models(self, invoke, telemetry, tmp_path):
        out = tmp_path / "report"
        result = invoke("report", "--input", telemetry, "--grid", "1-3", "--out", out)
        assert "Wrote 15-row report" in result.output

        lines = (out / "report.txt").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2 + 15
        tree_row = next(line for line in lines if line.startswith("Decision tree "))
        assert tree_row.split()[2] == "-"

        data = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert len(data["rows"]) == 15
        assert data["rows"][-1]["model"] == "Adaboost-decision tree-extra trees-random forest"
        assert set(data["parameters"]) == {
            "adaboost",
            "decision_tree",
            "extra_trees",
            "random_forest",
        }
        assert all(row["n_estimators"] in (None, 1, 2, 3) for row in data["rows"])

        predictions = pd.read_csv(out / "predictions.csv")
        assert len(predictions) == 60 - 42
        assert "Random forest" in predictions.columns

    def test_byte_identical(self, invoke, telemetry, tmp_path):
        for name in ("first", "second"):
            invoke(
                "report",
                "--input",
                telemetry,
                "--grid",
                "1-2",
                "--models",
                "extra_trees+random_forest",
                "--out",
                tmp_path / name,
            )
        for filename in ("report.txt", "report.json", "predictions.csv"):
            first = (tmp_path / "first" / filename).read_bytes()
            assert first == (tmp_path / "second" / filename).read_bytes()

    def test_restricted_models(self, invoke, telemetry, tmp_path):
        out = tmp_path / "report"
        invoke(
            "report",
            "--input",
            telemetry,
            "--grid",
            "1-2",
            "--models",
            "adaboost+random_forest",
            "--leakage",
            "oof",
            "--out",
            out,
        )
        data = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert [row["model"] for row in data["rows"]] == [
            "Adaboost",
            "Random forest",
            "Adaboost-random forest",
        ]

    def test_unknown_model(self, invoke, telemetry, tmp_path):
        result = invoke(
            "report", "--input", telemetry, "--models", "svm", "--out", tmp_path, exit_code=1
        )
        assert "Error" in result.output

    def test_missing_column(self, invoke, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("warehouse_temp,air_temp,grain_temp\n1,2,3\n4,5,6\n", encoding="utf-8")
        result = invoke("report", "--input", path, "--out", tmp_path / "out", exit_code=1)
        assert "Error" in result.output
        assert "air_humidity" in result.output

    def test_bad_cell(self, invoke, telemetry, tmp_path):
        lines = telemetry.read_text(encoding="utf-8").splitlines()
        cells = lines[3].split(",")
        cells[2] = "abc"
        lines[3] = ",".join(cells)
        path = tmp_path / "bad.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        result = invoke("report", "--input", path, "--out", tmp_path / "out", exit_code=1)
        assert "row 3" in result.output

    @pytest.mark.parametrize(
        "content",
        [b"", b"\xff\xfe\x00\x00", b"a,b\n1,2\n3,4,5\n"],
        ids=["empty", "utf16", "ragged"],
    )
    def test_unreadable_file(self, invoke, tmp_path, content):
        path = tmp_path / "bad.csv"
        path.write_bytes(content)
        result = invoke("report", "--input", path, "--out", tmp_path / "out", exit_code=1)
        assert "Error" in result.output
        assert result.exception is None or isinstance(result.exception, SystemExit)


def test_importance(invoke, telemetry, tmp_path):
    out = tmp_path / "importance"
    result = invoke("importance", "--input", telemetry, "--grid", "1-4", "--out", out)
    data = json.loads((out / "importance.json").read_text(encoding="utf-8"))
    assert data["n_estimators"] in (1, 2, 3, 4)
    assert len(data["features"]) == 4
    assert sum(item["importance"] for item in data["features"]) == pytest.approx(1.0)
    top = data["features"][0]["feature"]
    assert result.stdout.splitlines()[0].startswith(top)
    assert (out / "importance.txt").read_text(encoding="utf-8") == result.stdout


class TestTrainPredict:
    def test_single_model(self, invoke, telemetry, tmp_path):
        model_path = tmp_path / "rf.json"
        result = invoke(
            "train",
            "--input",
            telemetry,
            "--model",
            "random_forest",
            "--n-estimators",
            5,
            "--out",
            model_path,
        )
        assert "Saved Random forest" in result.output
        assert load_model(model_path).n_estimators == 5

        predictions = tmp_path / "predictions.csv"
        invoke("predict", "--model", model_path, "--input", telemetry, "--out", predictions)
        frame = pd.read_csv(predictions)
        expected = load_model(model_path).predict(load_csv(telemetry).features)
        np.testing.assert_allclose(frame["prediction"], expected, atol=1e-6)

    def test_predict_without_target_column(self, invoke, telemetry, tmp_path):
        model_path = tmp_path / "et.json"
        invoke(
            "train",
            "--input",
            telemetry,
            "--model",
            "extra_trees",
            "--n-estimators",
            5,
            "--out",
            model_path,
        )
        rows = tmp_path / "rows.csv"
        lines = telemetry.read_text(encoding="utf-8").splitlines()
        assert lines[0].endswith("," + TARGET_COLUMN)
        rows.write_text("".join(line.rsplit(",", 1)[0] + "\n" for line in lines), encoding="utf-8")

        out = tmp_path / "predictions.csv"
        result = invoke("predict", "--model", model_path, "--input", rows, "--out", out)
        assert "Wrote 60 predictions" in result.output
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["timestamp", "prediction"]
        expected = load_model(model_path).predict(load_csv(telemetry).features)
        np.testing.assert_allclose(frame["prediction"], expected, atol=1e-6)

    def test_fusion(self, invoke, telemetry, tmp_path):
        model_path = tmp_path / "fusion.json"
        invoke(
            "train",
            "--input",
            telemetry,
            "--model",
            "decision_tree+extra_trees",
            "--grid",
            "1-3",
            "--out",
            model_path,
        )
        model = load_model(model_path)
        assert [kind.value for kind in model.members] == ["decision_tree", "extra_trees"]
        assert model.n_estimators in (1, 2, 3)

    def test_duplicate_members(self, invoke, telemetry, tmp_path):
        invoke(
            "train",
            "--input",
            telemetry,
            "--model",
            "adaboost+adaboost",
            "--out",
            tmp_path / "m.json",
            exit_code=1,
        )

    def test_bad_model_file(self, invoke, telemetry, tmp_path):
        model_path = tmp_path / "model.json"
        model_path.write_text('{"format": "other"}', encoding="utf-8")
        result = invoke(
            "predict",
            "--model",
            model_path,
            "--input",
            telemetry,
            "--out",
            tmp_path / "p.csv",
            exit_code=1,
        )
        assert "Error" in result.output


class TestConfigFile:
    def test_file_values_are_defaults(self, invoke, tmp_path):
        config = tmp_path / "run.yaml"
        config.write_text("seed: 2\nsynth:\n  days: 10\n", encoding="utf-8")
        invoke("--config", config, "synth", "--out", tmp_path / "a.csv")
        assert len(pd.read_csv(tmp_path / "a.csv")) == 10
        invoke("synth", "--days", 10, "--seed", 2, "--out", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_command_line_wins(self, invoke, tmp_path):
        config = tmp_path / "run.yaml"
        config.write_text("synth:\n  days: 10\n", encoding="utf-8")
        invoke("--config", config, "synth", "--days", 12, "--out", tmp_path / "a.csv")
        assert len(pd.read_csv(tmp_path / "a.csv")) == 12

    def test_invalid_file(self, invoke, tmp_path):
        config = tmp_path / "run.yaml"
        config.write_text("- 1\n", encoding="utf-8")
        result = invoke("--config", config, "synth", "--out", tmp_path / "a.csv", exit_code=1)
        assert "Error" in result.output


def test_version(invoke):
    assert "grainfuse" in invoke("--version").output

import csv
import json

import pytest

from aflbt import cli
from aflbt.btcore import SingularInformation


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert cli.run_command(["synth", "--out", str(d), "--seed", "4", "--seasons", "2015-2016",
                            "--rounds", "10", "--no-finals"]) == 0
    return d


def test_validate(data, capsys):
    assert cli.run_command(["validate", "--data", str(data)]) == 0
    assert "180 games" in capsys.readouterr().out


def test_validate_missing_dir(tmp_path):
    assert cli.run_command(["validate", "--data", str(tmp_path / "nope")]) == 1


def test_usage_errors(data, tmp_path):
    assert cli.run_command([]) == 1
    assert cli.run_command(["experiment", "e9", "--data", str(data)]) == 1
    assert cli.run_command(["experiment", "e3", "--data", str(data), "--out", str(tmp_path)]) == 1
    assert cli.run_command(["experiment", "e1", "--encoding", "last4", "--data", str(data),
                            "--out", str(tmp_path)]) == 1


def test_numerical_failure_exit_code(data, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise SingularInformation("forced")
    monkeypatch.setattr(cli, "run_outcome_experiment", boom)
    assert cli.run_command(["experiment", "e1", "--data", str(data), "--out", str(tmp_path)]) == 2


def test_e1_report(data, tmp_path):
    assert cli.run_command(["experiment", "e1", "--data", str(data), "--train", "2015", "--out", str(tmp_path)]) == 0
    with (tmp_path / "report_e1_2015.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and rows[0]["test_season"] == "2016" and float(rows[0]["aic"]) > 0
    fit = json.loads((tmp_path / "fits" / "e1_2015_standard.json").read_text())
    assert fit["reference_team"] == rows[0]["reference_team"]


def test_reports_byte_identical(data, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.run_command(["experiment", "e3", "--data", str(data), "--encoding", "season", "--window", "1",
                                "--out", str(out), "--format", "json"]) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    assert files
    for rel in files:
        assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes()


def test_e4_and_report(data, tmp_path):
    assert cli.run_command(["experiment", "e4", "--data", str(data), "--train", "2015", "--encoding", "last4",
                            "--strategy", "majority", "--out", str(tmp_path)]) == 0
    preds = tmp_path / "predictions_e4_2015_last4_majority.csv"
    assert preds.exists()
    assert cli.run_command(["report", "--data", str(data), "--predictions", str(preds), "--out", str(tmp_path),
                            "--format", "json"]) == 0
    report = json.loads((tmp_path / "report_predictions_e4_2015_last4_majority.json").read_text())
    assert report[0]["n_games"] == 90 and 0 <= report[0]["accuracy"] <= 1


def test_fit_and_predict(data, tmp_path, capsys):
    assert cli.run_command(["fit", "--data", str(data), "--train", "2015", "--home-effect", "--out", str(tmp_path)]) == 0
    assert "AT_HOME" in json.loads(capsys.readouterr().out)["columns"]
    assert cli.run_command(["predict", "--data", str(data), "--train", "2015", "--encoding", "last4",
                            "--out", str(tmp_path)]) == 0
    assert (tmp_path / "predictions_ts-tv_last4_2015.csv").exists()
    assert cli.run_command(["predict", "--data", str(data), "--train", "2016", "--out", str(tmp_path)]) == 1

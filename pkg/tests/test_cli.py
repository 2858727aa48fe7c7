import hashlib
import json
from pathlib import Path

import jsonschema
import pytest

from medstate.cli import main
from medstate.cv import parse_report_csv, parse_sweep_csv

SCHEMA = json.loads((Path(__file__).parents[1] / "src" / "medstate" / "schemas" / "report.schema.json").read_text())


def _hashes(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(Path(d).iterdir())}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cohort") / "data"
    assert main(["synth", "--out", str(out), "--subjects", "3", "--minutes", "1", "--seed-cohort", "5"]) == 0
    return out


def test_synth_files(data_dir):
    names = sorted(p.name for p in data_dir.iterdir())
    assert len([n for n in names if n.endswith(".eegb")]) == 6
    assert "manifest.json" in names


def test_synth_four_subjects_idempotent(tmp_path):
    out = tmp_path / "missing" / "nested"
    args = ["synth", "--out", str(out), "--subjects", "4", "--minutes", "0.2"]
    assert main(args) == 0
    first = _hashes(out)
    assert len(first) == 9
    assert main(args) == 0
    assert _hashes(out) == first


def test_run_intra(data_dir, tmp_path):
    assert main(["run", "--data", str(data_dir), "--out", str(tmp_path), "--pipeline", "CspLda",
                 "--band", "HighGamma", "--mode", "intra"]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(report, SCHEMA)
    assert len(report["folds"]) == 30
    assert {f["subject_id"] for f in report["folds"]} == {"S01", "S02", "S03"}
    assert report["audit"]["leakage_ok"]
    csv = parse_report_csv((tmp_path / "report.csv").read_text())
    assert [a for _, _, a in csv["folds"]] == [f["accuracy"] for f in report["folds"]]
    assert csv["mean"] == report["mean"] and csv["sd"] == report["sd"]


def test_run_svdnn_inter_records_k(data_dir, tmp_path):
    assert main(["run", "--data", str(data_dir), "--out", str(tmp_path), "--pipeline", "SvdNn",
                 "--band", "Beta", "--mode", "inter", "--k-grid", "4,8"]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(report, SCHEMA)
    assert report["band"] == "Beta"
    assert report["audit"]["k_selection"]["frozen"] is True
    assert report["hyperparams"]["k"] == report["audit"]["k_selection"]["k"]


def test_run_is_deterministic(data_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"pipeline": "CspLda", "mode": "inter", "alpha": 1e-3, "pairs": 2,
                               "seeds": {"cohort": 5, "plan": 3, "train": 4}}))
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["run", "--config", str(cfg), "--data", str(data_dir), "--out", str(out)]) == 0
    assert (outs[0] / "report.json").read_bytes() == (outs[1] / "report.json").read_bytes()
    assert (outs[0] / "report.csv").read_bytes() == (outs[1] / "report.csv").read_bytes()
    report = json.loads((outs[0] / "report.json").read_text())
    assert report["hyperparams"] == {"alpha": 1e-3, "n_pairs": 2}
    assert report["seeds"] == {"cohort": 5, "plan": 3, "train": 4}


def test_flags_override_config(data_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"pipeline": "SvdNn", "mode": "intra"}))
    assert main(["run", "--config", str(cfg), "--pipeline", "CspLda", "--mode", "inter",
                 "--data", str(data_dir), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["pipeline"] == "CspLda" and report["mode"] == "LeaveOneSubjectOut"


def test_malformed_manifest_exit_2(data_dir, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "manifest.json").write_text('[{"subject_id": "S01"}]')
    out = tmp_path / "out"
    assert main(["run", "--data", str(bad), "--out", str(out)]) == 2
    assert not out.exists()
    assert "invalid input" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["--pipeline", "Nope"], ["--mode", "sideways"], ["--band", "Delta"], ["--alpha", "-1"], ["--alpha", "0,1"],
])
def test_bad_flags_exit_2(data_dir, tmp_path, args):
    out = tmp_path / "out"
    assert main(["run", "--data", str(data_dir), "--out", str(out), *args]) == 2
    assert not out.exists()


def test_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"pipeline": "CspLda", "colour": "blue"}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2
    assert main(["run", "--out", str(tmp_path / "o")]) == 2


def test_runtime_error_exit_1(tmp_path):
    # 4 s per condition is too few epochs for a 10-fold plan
    data = tmp_path / "data"
    assert main(["synth", "--out", str(data), "--subjects", "2", "--minutes", "0.07"]) == 0
    out = tmp_path / "out"
    assert main(["run", "--data", str(data), "--out", str(out), "--mode", "intra"]) == 1
    assert not out.exists()


def test_sweep_default_grid(data_dir, tmp_path):
    assert main(["sweep", "--data", str(data_dir), "--out", str(tmp_path), "--mode", "inter"]) == 0
    text = (tmp_path / "sweep.csv").read_text()
    lines = text.strip().splitlines()
    assert len(lines) == 10 and all(len(l.split(",")) == 12 for l in lines)
    cells = parse_sweep_csv(text)
    assert len(cells) == 99
    doc = json.loads((tmp_path / "sweep.json").read_text())
    for cell in doc["cells"]:
        jsonschema.validate(cell, SCHEMA)
        key = (cell["hyperparams"]["alpha"], cell["hyperparams"]["n_pairs"])
        assert cells[key] == (cell["mean"], cell["sd"])


def test_sweep_single_cell(data_dir, tmp_path):
    assert main(["sweep", "--data", str(data_dir), "--out", str(tmp_path), "--alpha", "0.01", "--pairs", "2",
                 "--mode", "inter"]) == 0
    lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
    assert lines == [lines[0], lines[1]] and lines[0] == "n_pairs,0.01"


def test_module_entry_point(data_dir):
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "medstate", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "synth" in res.stdout
